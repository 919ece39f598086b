# SPDX-License-Identifier: Apache-2.0
#
# cfisac: cooperative ISAC multistatic sensing toolkit
# Copyright (C) 2026 The cfisac authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ------------------------------------------------------------------------

"""Cooperative ISAC multistatic sensing toolkit: Python bindings."""

import json as _json

from . import _core
from ._core import (
    Error,
    commitment_loss,
    ema_update,
    index_bits,
    load_codebook,
    overhead_bits,
    pack_indices,
    quantize,
    read_cube_record,
    run_cli,
    save_codebook,
    unpack_indices,
)

__all__ = [
    "Error",
    "commitment_loss",
    "crlb",
    "ema_update",
    "estimate",
    "index_bits",
    "load_codebook",
    "overhead_bits",
    "pack_indices",
    "quantize",
    "read_cube_record",
    "run_cli",
    "save_codebook",
    "simulate",
    "unpack_indices",
]


def _config_text(config):
    if isinstance(config, dict):
        return _json.dumps(config)
    if isinstance(config, str) and config.lstrip().startswith("{"):
        return config
    with open(config, encoding="utf-8") as f:
        return f.read()


def simulate(config, seed, sample=0, with_cubes=True):
    """Draw one sample. `config` is a path, a JSON string or a dict."""
    return _core.simulate(_config_text(config), seed, sample, with_cubes)


def estimate(config, seed, sample=0):
    """Run the classical pipeline on a freshly drawn sample."""
    return _core.estimate(_config_text(config), seed, sample)


def crlb(config, seed, sample=0, simplified_derivatives=False):
    """Root CRLB, Schur-complemented bound and FIM for one drawn scene."""
    return _core.crlb(_config_text(config), seed, sample, simplified_derivatives)
