# stratexp: exponential ratio-type estimation in stratified random sampling
__version__ = '1.0.0'
__description__ = 'Exponential ratio-type estimators of a population mean under stratified sampling'
