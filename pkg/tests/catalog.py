"""Known-good model nomenclature strings the parser must handle.

Collected from published per-bridge result listings; a few entries spell
a zero dropout as "0.0" rather than the canonical "0", so they are kept
separately: the parser accepts them, but formatting canonicalizes.
"""

LSTM_CONFIGS = [
    "ss-(336,168)-128-0",
    "ss2-(336,168)-32-0",
    "ss-(336,168)-32-0.2",
    "ss-(720,168)-64-0.2",
    "ss-(336,168)-32-0",
    "ss2-(720,168)-128-0",
    "ss-(720,168)-64-0",
    "ss-(168,168)-128-0",
    "ss2-(168,168)-64-0",
    "ss2-(720,168)-32-0",
    "ss-(336,168)-64-0.2",
    "ss-(720,168)-32-0.2",
    "ss-(168,168)-32-0",
    "ss-(168,168)-64-0.2",
    "ss-(168,168)-32-0.2",
    "ss-(168,168)-64-0",
    "ss-(720,168)-32-0",
    "ss-(720,168)-128-0",
    "ss2-(720,168)-32-0.2",
]

CNN_CONFIGS = [
    "vcn-5-64-9-128-0",
    "vcn-7-64-9-128-0",
    "vcn-7-128-9-256-0",
    "vcn-7-128-9-256-0.2",
    "dcn-9-64-9-128-0",
    "dcn-5-64-5-128-0",
    "dcn-7-64-7-128-0",
    "dcn-3-64-3-64-0",
    "dcn-3-128-5-64-0",
    "fcn-5-64-7-64-0",
    "fcn-3-64-5-128-0",
    "fcn-9-64-7-128-0",
    "fcn-3-128-5-128-0",
    "fcn-5-64-7-128-0",
    "vcn-9-128-9-64-0.2",
    "vcn-9-128-7-64-0",
    "vcn-9-64-9-64-0.2",
    "vcn-9-64-9-64-0",
    "vcn-9-64-7-64-0",
    "dcn-5-128-5-64-0",
    "dcn-5-64-3-64-0",
    "dcn-7-128-5-64-0.2",
    "dcn-5-256-7-256-0",
    "fcn-3-256-5-128-0",
    "fcn-7-256-7-128-0.2",
    "fcn-5-128-7-256-0",
    "fcn-9-128-7-64-0.2",
    "vcn-3-64-3-64-0.2",
    "vcn-5-64-5-64-0.2",
    "vcn-5-64-7-128-0.2",
    "vcn-5-64-7-64-0.2",
    "dcn-5-256-3-256-0.2",
    "dcn-3-128-5-256-0.2",
    "dcn-5-256-5-256-0.2",
    "dcn-3-256-3-256-0.2",
    "fcn-5-256-5-256-0.2",
]

# zero dropout written "0.0": parseable, canonicalized on format
NONCANONICAL_CONFIGS = [
    "vcn-5-128-5-64-0.0",
    "dcn-5-128-5-256-0.0",
    "fcn-5-128-5-256-0.0",
    "fcn-5-256-5-256-0.0",
    "fcn-3-128-5-256-0.0",
    "fcn-5-256-3-256-0.0",
]

CANONICAL_CONFIGS = LSTM_CONFIGS + CNN_CONFIGS
ALL_CONFIGS = CANONICAL_CONFIGS + NONCANONICAL_CONFIGS
