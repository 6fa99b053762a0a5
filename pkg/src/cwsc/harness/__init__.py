"""Experiment harness: configuration, seeding, running and output."""
