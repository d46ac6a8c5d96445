"""Floating-point checks: group action, covariance, sphere quadrature, Knapp-Stein."""
