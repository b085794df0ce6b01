"""2D finite-element solver for viscoelastic Giesekus flow in
deformation-gradient form, with energy-stable time stepping."""

__version__ = "0.1.0"
