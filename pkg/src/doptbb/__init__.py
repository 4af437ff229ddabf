"""Integer D-optimal design: exact branch-and-bound and swap local search."""
