"""Packing several low-bit multiplications into one FPGA DSP block.

The pipeline runs in four stages:

* weights are manipulated into ``2**s * (1 + 2**n * mw)`` and rounded to a 3-bit core;
* they are grouped into k-lane tuples and fine-tuned until the packing fits;
* the tuples are dictionary-encoded into a ROM plus index words;
* everything executes bit-exactly on an emulated DSP inside a systolic array.
"""

from .config import DspConfig
from .dspemu import dsp_execute, exact_lane_product, extract_lanes, packed_products, pe_execute
from .manipulate import ManipulatedParam, approximate, manipulate, reconstruct, representable_set
from .packer import ParamTuple, bray_curtis, build_operands, feasibility, fine_tune, form_tuples, nearest_feasible
from .romdict import RomImage, build_rom, decode_stream, encode_stream, memory_crossover, wrc_ratio
from .sasim import ArrayConfig, ConvSpec, resource_report, run_conv, run_gemm

__all__ = [
    "ArrayConfig", "ConvSpec", "DspConfig", "ManipulatedParam", "ParamTuple", "RomImage",
    "approximate", "bray_curtis", "build_operands", "build_rom", "decode_stream", "dsp_execute",
    "encode_stream", "exact_lane_product", "extract_lanes", "feasibility", "fine_tune",
    "form_tuples", "manipulate", "memory_crossover", "nearest_feasible", "packed_products",
    "pe_execute", "reconstruct", "representable_set", "resource_report", "run_conv", "run_gemm",
    "wrc_ratio",
]
