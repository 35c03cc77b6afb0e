"""Equivariant neural networks over symmetric-tensor features.

Feedforward and recurrent networks whose features are symmetric 2x2 or
3x3 tensors, with weight and bias subspaces constrained so that the model
is exactly equivariant to a chosen material-symmetry group.  Ships with
analytic dataset generators (hyperelastic, tensegrity metamaterial cell,
elastic-plastic sequences), a small training engine with hand-written
reverse-mode gradients, a symmetry-audit metric, and tooling to discover
the symmetry frame of rotated data.
"""

__version__ = "0.1.0"
