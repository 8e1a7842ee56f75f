"""caplearn: active learning of probabilistic capability models of
black-box sequential decision-making agents."""

__version__ = "0.1.0"
