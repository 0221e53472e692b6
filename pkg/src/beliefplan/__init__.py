"""Belief-space planning library for driving-like environments."""
