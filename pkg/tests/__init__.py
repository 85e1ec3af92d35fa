"""promptcal shared test suite"""
