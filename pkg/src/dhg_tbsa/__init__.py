"""Joint aspect extraction and aspect sentiment tagging over a dynamic heterogeneous graph."""
from importlib.resources import files

__version__ = "0.1.0"


def toy_corpus_path():
    """Path of the bundled 20-sentence synthetic corpus."""
    return files(__package__) / "data" / "toy.tsv"
