"""
Test suite for the quantum Fourier ODE solver.
Long full-size checks run only when QFODE_RUN_SLOW is set.
"""
