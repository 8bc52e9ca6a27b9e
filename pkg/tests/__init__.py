"""Test package for fsm-wiretap."""
