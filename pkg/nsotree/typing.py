from typing import Literal

ActivationMode = Literal["relu", "softplus"]
"""
relu:     exact tree semantics, used for extraction and inference
softplus: smooth surrogate, used for training
"""

ModelKind = Literal["nsotree", "linear"]
"""
nsotree: layered oblique splits followed by a linear head
linear:  linear head over the covariates only (CPH-Linear)
"""

OptimizerKind = Literal["sgd", "adam"]
"""
sgd:  plain mini-batch gradient descent
adam: Adam with the usual default moments
"""

RiskKind = Literal["linear", "gaussian"]
"""
linear:   h(x) = x_0 + 2 x_1
gaussian: h(x) = log(lambda_max) exp(-(x_0^2 + x_1^2) / (2 r^2))
"""

CensoringMode = Literal["events", "censorings"]
"""
events:     product-limit estimate of the survival distribution
censorings: product-limit estimate of the censoring distribution (IPCW weights)
"""

ExportFormat = Literal["dot", "json"]
"""
dot:  graph description for Graphviz-compatible renderers
json: versioned structured text that round-trips through `parse_tree`
"""

ColumnRole = Literal["numeric", "categorical", "duration", "event", "ignore"]
"""
numeric:     parsed as a real covariate
categorical: one-hot expanded, categories ordered by first appearance
duration:    recorded time
event:       event indicator, 0 or 1
ignore:      read and discarded
"""
