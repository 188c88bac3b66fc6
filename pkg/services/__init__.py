"""
Library modules: road synthesis, quarter-car simulation, dataset, network, training and reports.
"""
