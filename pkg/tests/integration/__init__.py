"""Integration Tests"""
