"""Simulator of stream-task mapping on a bi-modal server network."""
