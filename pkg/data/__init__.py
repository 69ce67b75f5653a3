"""Corpus ingestion, batching, frequency bands, and the sample corpus generator"""
