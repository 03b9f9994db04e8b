"""
Quantum Fourier ODE solver.

PDEs are semi-discretized into ODE systems, advanced by Taylor time-stepping
over nested subintervals, and each step's integral of the driving function is
reduced to a Fourier series whose sin^2 integrals come from a simulated
quantum amplitude estimation circuit.
"""
