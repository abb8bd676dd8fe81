# Monte Carlo estimators
