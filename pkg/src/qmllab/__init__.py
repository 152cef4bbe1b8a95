"""Quantum machine-learning lab: statevector simulation, shift-rule gradients,
quantum counterparts of MLP / forward-forward / backprop training, and an
evolutionary search over model specifications."""

__version__ = "0.1.0"
