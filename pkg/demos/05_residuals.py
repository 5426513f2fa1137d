"""
Which approximation fits best
=============================

Mean reconstruction residual of HEPC, SP-FAPC and AP-FAPC over random
diagrams shaped like each source, using the published fit constants.
"""
from tdasleep.curves import FitConstants, estimate_constants
from tdasleep.diagram import DIAGRAM_KEYS
from tdasleep.report import format_table, residual_table
from tdasleep.synthetic import random_corpus

constants = FitConstants.paper_defaults()
for key in DIAGRAM_KEYS:
    print(f"{key:<22s} scale {constants.hepc_scale[key]:>10.3f}  SP {constants.sp_domain[key]}")

corpora = {key: random_corpus(key, 100, seed=i) for i, key in enumerate(DIAGRAM_KEYS)}
print(format_table(residual_table(corpora, constants), "text"))

# constants can also be estimated from any corpus
fit = estimate_constants(corpora, sample_size=50, seed=0)
print({k: round(v, 3) for k, v in fit.hepc_scale.items()})
