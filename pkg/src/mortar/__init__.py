"""Grid-game mechanic evolution: a MAP-Elites archive over a small rule
language, game composition via tree search, skill-based game scoring, and
search-constrained Shapley attribution of game quality to mechanics."""

__version__ = "0.1.0"
