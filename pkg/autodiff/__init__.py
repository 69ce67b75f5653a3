"""Rank-2 tensors, reverse-mode differentiation, and the gradient oracle"""
