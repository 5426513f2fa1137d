"""Topological features of respiratory airflow for sleep staging.

Persistence diagrams of a breathing signal (Rips on a delay embedding,
sublevel sets of the airflow and of its instantaneous rate) are turned into
lifespan-entropy persistence curves and summarized by Fourier (AP/SP-FAPC) or
Hermite (HEPC) coefficients.
"""
__version__ = "0.1.0"
