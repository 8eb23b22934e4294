"""Distance geometry toolkit: instances, EDMs, rigidity, Branch-and-Prune,
unassigned DGP, embeddings and rigidity percolation."""

__version__ = "0.1.0"
