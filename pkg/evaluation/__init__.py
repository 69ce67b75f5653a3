"""Perplexity, frequency-band analysis, parameter reports, and epoch timing"""
