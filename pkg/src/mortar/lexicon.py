"""The nine mechanic-type categories and their keyword lists.

Category order is fixed; the index doubles as the type-descriptor index.
"""
from __future__ import annotations

CATEGORY_NAMES = (
    "movement",
    "interaction",
    "combat",
    "progression",
    "environment",
    "puzzle",
    "resource management",
    "exploration",
    "time manipulation",
)

CATEGORY_KEYWORDS: tuple[tuple[str, ...], ...] = (
    ("move", "walk", "run", "jump", "fly", "teleport", "dash", "swim",
     "climb", "crouch", "sprint"),
    ("pick", "use", "interact", "open", "close", "talk", "trade", "craft",
     "activate", "push", "pull"),
    ("attack", "fight", "hit", "shoot", "defend", "block", "dodge", "cast",
     "spell", "heal", "damage"),
    ("level", "upgrade", "unlock", "improve", "evolve", "progress",
     "achieve", "complete", "quest", "mission"),
    ("weather", "day", "night", "season", "climate", "destroy", "build",
     "terraform", "grow", "plant"),
    ("solve", "puzzle", "riddle", "match", "connect", "arrange", "decode",
     "decipher", "logic", "pattern"),
    ("collect", "gather", "manage", "inventory", "store", "spend", "earn",
     "balance", "allocate", "distribute"),
    ("explore", "discover", "map", "reveal", "uncover", "navigate",
     "search", "investigate", "scout", "survey"),
    ("time", "slow", "fast", "rewind", "forward", "pause", "resume",
     "loop", "cycle", "sequence"),
)

NUM_CATEGORIES = len(CATEGORY_NAMES)


def default_lexicon() -> tuple[tuple[str, tuple[str, ...]], ...]:
    """(name, keywords) pairs in fixed category order."""
    return tuple(zip(CATEGORY_NAMES, CATEGORY_KEYWORDS))
