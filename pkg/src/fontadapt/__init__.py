"""Context-adaptive font recommendation engine.

Maps live reading context (ambient light, motion, reading distance, personal
state) to legible text parameters, cold-started from group statistics and
personalized online from confirmed user corrections.
"""

__version__ = "0.1.0"
