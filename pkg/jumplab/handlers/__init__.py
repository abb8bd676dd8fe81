# Experiment handlers, one module per experiment family

from jumplab.handlers import counterexample, exit_times, harmonic, hitting, kernels, regularity

MODULES = (exit_times, hitting, harmonic, regularity, counterexample, kernels)

HANDLERS = {name: module.handler for module in MODULES for name in module.SCHEMAS}
SCHEMAS = {name: schema for module in MODULES for name, schema in module.SCHEMAS.items()}
