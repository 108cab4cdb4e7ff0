# Unit tests for Meticulous Espresso Add-on
# Place isolated, logic-only, or handler tests here.
