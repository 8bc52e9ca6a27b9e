"""Command-line entry points for fsm_wiretap experiments."""
