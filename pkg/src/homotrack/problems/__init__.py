from .benchmarks import gen_cyclic, gen_eco
from .start import StartPair, TrackBudgetExceeded, read_start_pair, total_degree_start, write_start_pair
