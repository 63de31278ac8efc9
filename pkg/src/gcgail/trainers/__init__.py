"""Behaviour cloning and the adversarial imitation trainers."""
