"""Test suite for ptwell."""
