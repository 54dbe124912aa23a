from src.demos.ppr import ppr_oracle_dense, ppr_scores
from src.demos.select import (build_demo_sets, index_demonstrations, lp_candidate_edges, load_demonstrations,
                              save_demonstrations, select_lp_demos, select_nc_demos)

__all__ = ["build_demo_sets", "index_demonstrations", "load_demonstrations", "lp_candidate_edges",
           "ppr_oracle_dense", "ppr_scores", "save_demonstrations", "select_lp_demos", "select_nc_demos"]
