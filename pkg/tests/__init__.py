"""
Tests for PyInfra OrbStack Connector
"""
