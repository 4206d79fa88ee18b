"""Goal-directed grammar-based fuzzing with probabilistic grammars."""

from importlib import resources

from .grammar import ProbabilisticGrammar, load_grammar, save_grammar

__version__ = "0.1.0"


def data_path(name: str):
    """Path of a bundled example file (grammars and seed directories)."""
    return resources.files(__name__) / "data" / name


def load_bundled_seeds(name: str) -> list[bytes]:
    """Seed inputs of a bundled corpus, sorted by file name."""
    folder = data_path(name)
    return [p.read_bytes() for p in sorted(folder.iterdir(), key=lambda p: p.name)
            if p.is_file()]


__all__ = ["ProbabilisticGrammar", "load_grammar", "save_grammar", "data_path",
           "load_bundled_seeds", "__version__"]
