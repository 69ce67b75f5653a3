"""Configuration and report records"""
