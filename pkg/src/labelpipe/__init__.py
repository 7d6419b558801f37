"""labelpipe: supervised text classifiers from LLM surrogate labels."""

__version__ = "0.1.0"
