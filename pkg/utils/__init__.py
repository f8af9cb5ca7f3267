"""Console display, config parsing and run logging shared by the command-line driver"""
