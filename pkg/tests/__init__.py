"""labsched テストスイート"""
