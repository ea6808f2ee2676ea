"""Sturm-Liouville problems on [-1, 1] with two transmission points and an
eigenparameter-dependent boundary condition at x = 1."""
