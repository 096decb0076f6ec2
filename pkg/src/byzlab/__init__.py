"""Byzantine agreement under device-interface faults, plus Shamir-shared MPC."""

__version__ = "0.1.0"
