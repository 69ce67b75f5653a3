"""Dropout, output-layer parameterizations, and the recurrent context encoder"""
