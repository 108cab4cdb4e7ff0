"""Test suite for Meticulous Espresso Add-on."""
