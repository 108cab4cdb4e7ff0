# Integration tests for Meticulous Espresso Add-on
# Place integration (end-to-end, API, persistence) tests here.
