"""Projectively flat Finsler metrics built from their values at the origin."""
