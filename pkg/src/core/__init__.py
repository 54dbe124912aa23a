from src.core.tensor import Module, Tape, Tensor, backward

__all__ = ["Module", "Tape", "Tensor", "backward"]
