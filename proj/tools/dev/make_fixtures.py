#!/usr/bin/env python3
"""Author the bundled test-system case files and freeze reference fixtures.

This script is the independent reference implementation used to pin expected
values for the C++ library: it builds the admittance matrix from incidence
matrices, solves power flow in complex form, and assembles the V-scaled
Jacobian from complex partial derivatives. The C++ code uses a per-branch
real-arithmetic formulation, so agreement is a genuine cross-check.

Outputs (repo-relative):
  data/cases/ieee9.case, ieee9_x100.case, ieee118.case
  tests/fixtures/ieee9_solution.json, ieee118_solution.json
  tests/fixtures/ieee9_ybus.json
  tests/fixtures/ieee118_jacobian0.csv

Run from anywhere: paths are derived from this file's location.
"""

import json
import math
import pathlib
import sys

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parents[2]

PQ, PV, SLACK = 1, 2, 3

# ---------------------------------------------------------------------------
# Case tables. Loads/generation in MW/MVAr on a 100 MVA base, shunts in MVAr
# at V = 1, impedances in per-unit. Emitted case files are fully per-unit.
# ---------------------------------------------------------------------------

CASE9 = {
    "name": "ieee9",
    "base_mva": 100.0,
    # id, type, Pd, Qd, Gs, Bs, Vset
    "bus": [
        (1, SLACK, 0, 0, 0, 0, 1.0),
        (2, PV, 0, 0, 0, 0, 1.0),
        (3, PV, 0, 0, 0, 0, 1.0),
        (4, PQ, 0, 0, 0, 0, 1.0),
        (5, PQ, 90, 30, 0, 0, 1.0),
        (6, PQ, 0, 0, 0, 0, 1.0),
        (7, PQ, 100, 35, 0, 0, 1.0),
        (8, PQ, 0, 0, 0, 0, 1.0),
        (9, PQ, 125, 50, 0, 0, 1.0),
    ],
    # from, to, r, x, b, tap
    "branch": [
        (1, 4, 0.0, 0.0576, 0.0, 0.0),
        (4, 5, 0.017, 0.092, 0.158, 0.0),
        (5, 6, 0.039, 0.17, 0.358, 0.0),
        (3, 6, 0.0, 0.0586, 0.0, 0.0),
        (6, 7, 0.0119, 0.1008, 0.209, 0.0),
        (7, 8, 0.0085, 0.072, 0.149, 0.0),
        (8, 2, 0.0, 0.0625, 0.0, 0.0),
        (8, 9, 0.032, 0.161, 0.306, 0.0),
        (9, 4, 0.01, 0.085, 0.176, 0.0),
    ],
    # bus, Pg, Vset
    "gen": [
        (1, 0.0, 1.0),
        (2, 163.0, 1.0),
        (3, 85.0, 1.0),
    ],
}

# 118-bus system: 118 buses, 186 branch records (the 49-66 circuit appears
# twice with identical parameters), 54 generator buses, slack at bus 69.
CASE118_BUS = [
    # id, type, Pd, Qd, Bs   (Gs is zero everywhere in this system)
    (1, PV, 51, 27, 0), (2, PQ, 20, 9, 0), (3, PQ, 39, 10, 0),
    (4, PV, 39, 12, 0), (5, PQ, 0, 0, -40), (6, PV, 52, 22, 0),
    (7, PQ, 19, 2, 0), (8, PV, 28, 0, 0), (9, PQ, 0, 0, 0),
    (10, PV, 0, 0, 0), (11, PQ, 70, 23, 0), (12, PV, 47, 10, 0),
    (13, PQ, 34, 16, 0), (14, PQ, 14, 1, 0), (15, PV, 90, 30, 0),
    (16, PQ, 25, 10, 0), (17, PQ, 11, 3, 0), (18, PV, 60, 34, 0),
    (19, PV, 45, 25, 0), (20, PQ, 18, 3, 0), (21, PQ, 14, 8, 0),
    (22, PQ, 10, 5, 0), (23, PQ, 7, 3, 0), (24, PV, 13, 0, 0),
    (25, PV, 0, 0, 0), (26, PV, 0, 0, 0), (27, PV, 71, 13, 0),
    (28, PQ, 17, 7, 0), (29, PQ, 24, 4, 0), (30, PQ, 0, 0, 0),
    (31, PV, 43, 27, 0), (32, PV, 59, 23, 0), (33, PQ, 23, 9, 0),
    (34, PV, 59, 26, 14), (35, PQ, 33, 9, 0), (36, PV, 31, 17, 0),
    (37, PQ, 0, 0, -25), (38, PQ, 0, 0, 0), (39, PQ, 27, 11, 0),
    (40, PV, 66, 23, 0), (41, PQ, 37, 10, 0), (42, PV, 96, 23, 0),
    (43, PQ, 18, 7, 0), (44, PQ, 16, 8, 10), (45, PQ, 53, 22, 10),
    (46, PV, 28, 10, 10), (47, PQ, 34, 0, 0), (48, PQ, 20, 11, 15),
    (49, PV, 87, 30, 0), (50, PQ, 17, 4, 0), (51, PQ, 17, 8, 0),
    (52, PQ, 18, 5, 0), (53, PQ, 23, 11, 0), (54, PV, 113, 32, 0),
    (55, PV, 63, 22, 0), (56, PV, 84, 18, 0), (57, PQ, 12, 3, 0),
    (58, PQ, 12, 3, 0), (59, PV, 277, 113, 0), (60, PQ, 78, 3, 0),
    (61, PV, 0, 0, 0), (62, PV, 77, 14, 0), (63, PQ, 0, 0, 0),
    (64, PQ, 0, 0, 0), (65, PV, 0, 0, 0), (66, PV, 39, 18, 0),
    (67, PQ, 28, 7, 0), (68, PQ, 0, 0, 0), (69, SLACK, 0, 0, 0),
    (70, PV, 66, 20, 0), (71, PQ, 0, 0, 0), (72, PV, 12, 0, 0),
    (73, PV, 6, 0, 0), (74, PV, 68, 27, 12), (75, PQ, 47, 11, 0),
    (76, PV, 68, 36, 0), (77, PV, 61, 28, 0), (78, PQ, 71, 26, 0),
    (79, PQ, 39, 32, 20), (80, PV, 130, 26, 0), (81, PQ, 0, 0, 0),
    (82, PQ, 54, 27, 20), (83, PQ, 20, 10, 10), (84, PQ, 11, 7, 0),
    (85, PV, 24, 15, 0), (86, PQ, 21, 10, 0), (87, PV, 0, 0, 0),
    (88, PQ, 48, 10, 0), (89, PV, 0, 0, 0), (90, PV, 163, 42, 0),
    (91, PV, 10, 0, 0), (92, PV, 65, 10, 0), (93, PQ, 12, 7, 0),
    (94, PQ, 30, 16, 0), (95, PQ, 42, 31, 0), (96, PQ, 38, 15, 0),
    (97, PQ, 15, 9, 0), (98, PQ, 34, 8, 0), (99, PV, 42, 0, 0),
    (100, PV, 37, 18, 0), (101, PQ, 22, 15, 0), (102, PQ, 5, 3, 0),
    (103, PV, 23, 16, 0), (104, PV, 38, 25, 0), (105, PV, 31, 26, 20),
    (106, PQ, 43, 16, 0), (107, PV, 50, 12, 6), (108, PQ, 2, 1, 0),
    (109, PQ, 8, 3, 0), (110, PV, 39, 30, 6), (111, PV, 0, 0, 0),
    (112, PV, 68, 13, 0), (113, PV, 6, 0, 0), (114, PQ, 8, 3, 0),
    (115, PQ, 22, 7, 0), (116, PV, 184, 0, 0), (117, PQ, 20, 8, 0),
    (118, PQ, 33, 15, 0),
]

CASE118_BRANCH = [
    # from, to, r, x, b, tap (0 = plain line)
    (1, 2, 0.0303, 0.0999, 0.0254, 0.0),
    (1, 3, 0.0129, 0.0424, 0.01082, 0.0),
    (4, 5, 0.00176, 0.00798, 0.0021, 0.0),
    (3, 5, 0.0241, 0.108, 0.0284, 0.0),
    (5, 6, 0.0119, 0.054, 0.01426, 0.0),
    (6, 7, 0.00459, 0.0208, 0.0055, 0.0),
    (8, 9, 0.00244, 0.0305, 1.162, 0.0),
    (8, 5, 0.0, 0.0267, 0.0, 0.985),
    (9, 10, 0.00258, 0.0322, 1.23, 0.0),
    (4, 11, 0.0209, 0.0688, 0.01748, 0.0),
    (5, 11, 0.0203, 0.0682, 0.01738, 0.0),
    (11, 12, 0.00595, 0.0196, 0.00502, 0.0),
    (2, 12, 0.0187, 0.0616, 0.01572, 0.0),
    (3, 12, 0.0484, 0.16, 0.0406, 0.0),
    (7, 12, 0.00862, 0.034, 0.00874, 0.0),
    (11, 13, 0.02225, 0.0731, 0.01876, 0.0),
    (12, 14, 0.0215, 0.0707, 0.01816, 0.0),
    (13, 15, 0.0744, 0.2444, 0.06268, 0.0),
    (14, 15, 0.0595, 0.195, 0.0502, 0.0),
    (12, 16, 0.0212, 0.0834, 0.0214, 0.0),
    (15, 17, 0.0132, 0.0437, 0.0444, 0.0),
    (16, 17, 0.0454, 0.1801, 0.0466, 0.0),
    (17, 18, 0.0123, 0.0505, 0.01298, 0.0),
    (18, 19, 0.01119, 0.0493, 0.01142, 0.0),
    (19, 20, 0.0252, 0.117, 0.0298, 0.0),
    (15, 19, 0.012, 0.0394, 0.0101, 0.0),
    (20, 21, 0.0183, 0.0849, 0.0216, 0.0),
    (21, 22, 0.0209, 0.097, 0.0246, 0.0),
    (22, 23, 0.0342, 0.159, 0.0404, 0.0),
    (23, 24, 0.0135, 0.0492, 0.0498, 0.0),
    (23, 25, 0.0156, 0.08, 0.0864, 0.0),
    (26, 25, 0.0, 0.0382, 0.0, 0.96),
    (25, 27, 0.0318, 0.163, 0.1764, 0.0),
    (27, 28, 0.01913, 0.0855, 0.0216, 0.0),
    (28, 29, 0.0237, 0.0943, 0.0238, 0.0),
    (30, 17, 0.0, 0.0388, 0.0, 0.96),
    (8, 30, 0.00431, 0.0504, 0.514, 0.0),
    (26, 30, 0.00799, 0.086, 0.908, 0.0),
    (17, 31, 0.0474, 0.1563, 0.0399, 0.0),
    (29, 31, 0.0108, 0.0331, 0.0083, 0.0),
    (23, 32, 0.0317, 0.1153, 0.1173, 0.0),
    (31, 32, 0.0298, 0.0985, 0.0251, 0.0),
    (27, 32, 0.0229, 0.0755, 0.01926, 0.0),
    (15, 33, 0.038, 0.1244, 0.03194, 0.0),
    (19, 34, 0.0752, 0.247, 0.0632, 0.0),
    (35, 36, 0.00224, 0.0102, 0.00268, 0.0),
    (35, 37, 0.011, 0.0497, 0.01318, 0.0),
    (33, 37, 0.0415, 0.142, 0.0366, 0.0),
    (34, 36, 0.00871, 0.0268, 0.00568, 0.0),
    (34, 37, 0.00256, 0.0094, 0.00984, 0.0),
    (38, 37, 0.0, 0.0375, 0.0, 0.935),
    (37, 39, 0.0321, 0.106, 0.027, 0.0),
    (37, 40, 0.0593, 0.168, 0.042, 0.0),
    (30, 38, 0.00464, 0.054, 0.422, 0.0),
    (39, 40, 0.0184, 0.0605, 0.01552, 0.0),
    (40, 41, 0.0145, 0.0487, 0.01222, 0.0),
    (40, 42, 0.0555, 0.183, 0.0466, 0.0),
    (41, 42, 0.041, 0.135, 0.0344, 0.0),
    (43, 44, 0.0608, 0.2454, 0.06068, 0.0),
    (34, 43, 0.0413, 0.1681, 0.04226, 0.0),
    (44, 45, 0.0224, 0.0901, 0.0224, 0.0),
    (45, 46, 0.04, 0.1356, 0.0332, 0.0),
    (46, 47, 0.038, 0.127, 0.0316, 0.0),
    (46, 48, 0.0601, 0.189, 0.0472, 0.0),
    (47, 49, 0.0191, 0.0625, 0.01604, 0.0),
    (42, 49, 0.0715, 0.323, 0.086, 0.0),
    (42, 49, 0.0715, 0.323, 0.086, 0.0),
    (45, 49, 0.0684, 0.186, 0.0444, 0.0),
    (48, 49, 0.0179, 0.0505, 0.01258, 0.0),
    (49, 50, 0.0267, 0.0752, 0.01874, 0.0),
    (49, 51, 0.0486, 0.137, 0.0342, 0.0),
    (51, 52, 0.0203, 0.0588, 0.01396, 0.0),
    (52, 53, 0.0405, 0.1635, 0.04058, 0.0),
    (53, 54, 0.0263, 0.122, 0.031, 0.0),
    (49, 54, 0.073, 0.289, 0.0738, 0.0),
    (49, 54, 0.0869, 0.291, 0.073, 0.0),
    (54, 55, 0.0169, 0.0707, 0.0202, 0.0),
    (54, 56, 0.00275, 0.00955, 0.00732, 0.0),
    (55, 56, 0.00488, 0.0151, 0.00374, 0.0),
    (56, 57, 0.0343, 0.0966, 0.0242, 0.0),
    (50, 57, 0.0474, 0.134, 0.0332, 0.0),
    (56, 58, 0.0343, 0.0966, 0.0242, 0.0),
    (51, 58, 0.0255, 0.0719, 0.01788, 0.0),
    (54, 59, 0.0503, 0.2293, 0.0598, 0.0),
    (56, 59, 0.0825, 0.251, 0.0569, 0.0),
    (56, 59, 0.0803, 0.239, 0.0536, 0.0),
    (55, 59, 0.04739, 0.2158, 0.05646, 0.0),
    (59, 60, 0.0317, 0.145, 0.0376, 0.0),
    (59, 61, 0.0328, 0.15, 0.0388, 0.0),
    (60, 61, 0.00264, 0.0135, 0.01456, 0.0),
    (60, 62, 0.0123, 0.0561, 0.01468, 0.0),
    (61, 62, 0.00824, 0.0376, 0.0098, 0.0),
    (63, 59, 0.0, 0.0386, 0.0, 0.96),
    (63, 64, 0.00172, 0.02, 0.216, 0.0),
    (64, 61, 0.0, 0.0268, 0.0, 0.985),
    (38, 65, 0.00901, 0.0986, 1.046, 0.0),
    (64, 65, 0.00269, 0.0302, 0.38, 0.0),
    (49, 66, 0.018, 0.0919, 0.0248, 0.0),
    (49, 66, 0.018, 0.0919, 0.0248, 0.0),
    (62, 66, 0.0482, 0.218, 0.0578, 0.0),
    (62, 67, 0.0258, 0.117, 0.031, 0.0),
    (65, 66, 0.0, 0.037, 0.0, 0.935),
    (66, 67, 0.0224, 0.1015, 0.02682, 0.0),
    (65, 68, 0.00138, 0.016, 0.638, 0.0),
    (47, 69, 0.0844, 0.2778, 0.07092, 0.0),
    (49, 69, 0.0985, 0.324, 0.0828, 0.0),
    (68, 69, 0.0, 0.037, 0.0, 0.935),
    (69, 70, 0.03, 0.127, 0.122, 0.0),
    (24, 70, 0.00221, 0.4115, 0.10198, 0.0),
    (70, 71, 0.00882, 0.0355, 0.00878, 0.0),
    (24, 72, 0.0488, 0.196, 0.0488, 0.0),
    (71, 72, 0.0446, 0.18, 0.04444, 0.0),
    (71, 73, 0.00866, 0.0454, 0.01178, 0.0),
    (70, 74, 0.0401, 0.1323, 0.03368, 0.0),
    (70, 75, 0.0428, 0.141, 0.036, 0.0),
    (69, 75, 0.0405, 0.122, 0.124, 0.0),
    (74, 75, 0.0123, 0.0406, 0.01034, 0.0),
    (76, 77, 0.0444, 0.148, 0.0368, 0.0),
    (69, 77, 0.0309, 0.101, 0.1038, 0.0),
    (75, 77, 0.0601, 0.1999, 0.04978, 0.0),
    (77, 78, 0.00376, 0.0124, 0.01264, 0.0),
    (78, 79, 0.00546, 0.0244, 0.00648, 0.0),
    (77, 80, 0.017, 0.0485, 0.0472, 0.0),
    (77, 80, 0.0294, 0.105, 0.0228, 0.0),
    (79, 80, 0.0156, 0.0704, 0.0187, 0.0),
    (68, 81, 0.00175, 0.0202, 0.808, 0.0),
    (81, 80, 0.0, 0.037, 0.0, 0.935),
    (77, 82, 0.0298, 0.0853, 0.08174, 0.0),
    (82, 83, 0.0112, 0.03665, 0.03796, 0.0),
    (83, 84, 0.0625, 0.132, 0.0258, 0.0),
    (83, 85, 0.043, 0.148, 0.0348, 0.0),
    (84, 85, 0.0302, 0.0641, 0.01234, 0.0),
    (85, 86, 0.035, 0.123, 0.0276, 0.0),
    (86, 87, 0.02828, 0.2074, 0.0445, 0.0),
    (85, 88, 0.02, 0.102, 0.0276, 0.0),
    (85, 89, 0.0239, 0.173, 0.047, 0.0),
    (88, 89, 0.0139, 0.0712, 0.01934, 0.0),
    (89, 90, 0.0518, 0.188, 0.0528, 0.0),
    (89, 90, 0.0238, 0.0997, 0.106, 0.0),
    (90, 91, 0.0254, 0.0836, 0.0214, 0.0),
    (89, 92, 0.0099, 0.0505, 0.0548, 0.0),
    (89, 92, 0.0393, 0.1581, 0.0414, 0.0),
    (91, 92, 0.0387, 0.1272, 0.03268, 0.0),
    (92, 93, 0.0258, 0.0848, 0.0218, 0.0),
    (92, 94, 0.0481, 0.158, 0.0406, 0.0),
    (93, 94, 0.0223, 0.0732, 0.01876, 0.0),
    (94, 95, 0.0132, 0.0434, 0.0111, 0.0),
    (80, 96, 0.0356, 0.182, 0.0494, 0.0),
    (82, 96, 0.0162, 0.053, 0.0544, 0.0),
    (94, 96, 0.0269, 0.0869, 0.023, 0.0),
    (80, 97, 0.0183, 0.0934, 0.0254, 0.0),
    (80, 98, 0.0238, 0.108, 0.0286, 0.0),
    (80, 99, 0.0454, 0.206, 0.0546, 0.0),
    (92, 100, 0.0648, 0.295, 0.0472, 0.0),
    (94, 100, 0.0178, 0.058, 0.0604, 0.0),
    (95, 96, 0.0171, 0.0547, 0.01474, 0.0),
    (96, 97, 0.0173, 0.0885, 0.024, 0.0),
    (98, 100, 0.0397, 0.179, 0.0476, 0.0),
    (99, 100, 0.018, 0.0813, 0.0216, 0.0),
    (100, 101, 0.0277, 0.1262, 0.0328, 0.0),
    (92, 102, 0.0123, 0.0559, 0.01464, 0.0),
    (101, 102, 0.0246, 0.112, 0.0294, 0.0),
    (100, 103, 0.016, 0.0525, 0.0536, 0.0),
    (100, 104, 0.0451, 0.204, 0.0541, 0.0),
    (103, 104, 0.0466, 0.1584, 0.0407, 0.0),
    (103, 105, 0.0535, 0.1625, 0.0408, 0.0),
    (100, 106, 0.0605, 0.229, 0.062, 0.0),
    (104, 105, 0.00994, 0.0378, 0.00986, 0.0),
    (105, 106, 0.014, 0.0547, 0.01434, 0.0),
    (105, 107, 0.053, 0.183, 0.0472, 0.0),
    (105, 108, 0.0261, 0.0703, 0.01844, 0.0),
    (106, 107, 0.053, 0.183, 0.0472, 0.0),
    (108, 109, 0.0105, 0.0288, 0.0076, 0.0),
    (103, 110, 0.03906, 0.1813, 0.0461, 0.0),
    (109, 110, 0.0278, 0.0762, 0.0202, 0.0),
    (110, 111, 0.022, 0.0755, 0.02, 0.0),
    (110, 112, 0.0247, 0.064, 0.062, 0.0),
    (17, 113, 0.00913, 0.0301, 0.00768, 0.0),
    (32, 113, 0.0615, 0.203, 0.0518, 0.0),
    (32, 114, 0.0135, 0.0612, 0.01628, 0.0),
    (27, 115, 0.0164, 0.0741, 0.01972, 0.0),
    (114, 115, 0.0023, 0.0104, 0.00276, 0.0),
    (68, 116, 0.00034, 0.00405, 0.164, 0.0),
    (12, 117, 0.0329, 0.14, 0.0358, 0.0),
    (75, 118, 0.0145, 0.0481, 0.01198, 0.0),
    (76, 118, 0.0164, 0.0544, 0.01356, 0.0),
]

CASE118_GEN = [
    # bus, Pg, Vset
    (1, 0.0, 0.955), (4, 0.0, 0.998), (6, 0.0, 0.99), (8, 0.0, 1.015),
    (10, 450.0, 1.05), (12, 85.0, 0.99), (15, 0.0, 0.97), (18, 0.0, 0.973),
    (19, 0.0, 0.962), (24, 0.0, 0.992), (25, 220.0, 1.05), (26, 314.0, 1.015),
    (27, 0.0, 0.968), (31, 7.0, 0.967), (32, 0.0, 0.963), (34, 0.0, 0.984),
    (36, 0.0, 0.98), (40, 0.0, 0.97), (42, 0.0, 0.985), (46, 19.0, 1.005),
    (49, 204.0, 1.025), (54, 48.0, 0.955), (55, 0.0, 0.952), (56, 0.0, 0.954),
    (59, 155.0, 0.985), (61, 160.0, 0.995), (62, 0.0, 0.998), (65, 391.0, 1.005),
    (66, 392.0, 1.05), (69, 516.4, 1.035), (70, 0.0, 0.984), (72, 0.0, 0.98),
    (73, 0.0, 0.991), (74, 0.0, 0.958), (76, 0.0, 0.943), (77, 0.0, 1.006),
    (80, 477.0, 1.04), (85, 0.0, 0.985), (87, 4.0, 1.015), (89, 607.0, 1.005),
    (90, 0.0, 0.985), (91, 0.0, 0.98), (92, 0.0, 0.99), (99, 0.0, 1.01),
    (100, 252.0, 1.017), (103, 40.0, 1.01), (104, 0.0, 0.971), (105, 0.0, 0.965),
    (107, 0.0, 0.952), (110, 0.0, 0.973), (111, 36.0, 0.98), (112, 0.0, 0.975),
    (113, 0.0, 0.993), (116, 0.0, 1.005),
]

CASE118 = {
    "name": "ieee118",
    "base_mva": 100.0,
    "bus": [(i, t, pd, qd, 0.0, bs, 1.0) for (i, t, pd, qd, bs) in CASE118_BUS],
    "branch": CASE118_BRANCH,
    "gen": [(b, pg, v) for (b, pg, v) in CASE118_GEN],
}


# ---------------------------------------------------------------------------
# Reference implementation (incidence-matrix Y-bus, complex-form NR).
# ---------------------------------------------------------------------------

def prep(case):
    bus = case["bus"]
    n = len(bus)
    ids = [b[0] for b in bus]
    assert ids == list(range(1, n + 1)), "bus ids must be 1..n"
    base = case["base_mva"]
    kind = np.array([b[1] for b in bus])
    pd = np.array([b[2] for b in bus]) / base
    qd = np.array([b[3] for b in bus]) / base
    gs = np.array([b[4] for b in bus]) / base
    bs = np.array([b[5] for b in bus]) / base
    vset = np.array([float(b[6]) for b in bus])
    pg = np.zeros(n)
    for (b, p, v) in case["gen"]:
        pg[b - 1] += p / base
        vset[b - 1] = v
    return n, kind, pd, qd, gs, bs, vset, pg


def ybus(case, n, gs, bs):
    br = case["branch"]
    nl = len(br)
    Cf = np.zeros((nl, n))
    Ct = np.zeros((nl, n))
    ys = np.zeros(nl, dtype=complex)
    bc = np.zeros(nl)
    tap = np.ones(nl)
    for k, (f, t, r, x, b, tp) in enumerate(br):
        Cf[k, f - 1] = 1.0
        Ct[k, t - 1] = 1.0
        ys[k] = 1.0 / complex(r, x)
        bc[k] = b
        tap[k] = tp if tp != 0.0 else 1.0
    Yff = (ys + 0.5j * bc) / (tap * tap)
    Yft = -ys / tap
    Ytf = -ys / tap
    Ytt = ys + 0.5j * bc
    Yf = np.diag(Yff) @ Cf + np.diag(Yft) @ Ct
    Yt = np.diag(Ytf) @ Cf + np.diag(Ytt) @ Ct
    Y = Cf.T @ Yf + Ct.T @ Yt + np.diag(gs + 1j * bs)
    return Y


def newton(Y, kind, vset, p_target, q_target, tol=1e-12, max_iter=40):
    n = len(kind)
    slack = int(np.where(kind == SLACK)[0][0])
    pvpq = [i for i in range(n) if kind[i] != SLACK]
    pq = [i for i in range(n) if kind[i] == PQ]
    vm = np.where(kind == PQ, 1.0, vset)
    va = np.zeros(n)
    iters_to_1e8 = None
    it = 0
    while True:
        V = vm * np.exp(1j * va)
        S = V * np.conj(Y @ V)
        f = np.concatenate([S.real[pvpq] - p_target[pvpq],
                            S.imag[pq] - q_target[pq]])
        mis = np.max(np.abs(f)) if len(f) else 0.0
        if iters_to_1e8 is None and mis < 1e-8:
            iters_to_1e8 = it
        if mis < tol:
            return vm, va, S, it, iters_to_1e8, mis
        if it >= max_iter or not np.isfinite(mis):
            return None
        Ibus = Y @ V
        dV = np.diag(V)
        dI = np.diag(Ibus)
        dVn = np.diag(V / np.abs(V))
        dS_dVa = 1j * dV @ np.conj(dI - Y @ dV)
        dS_dVm = dV @ np.conj(Y @ dVn) + np.conj(dI) @ dVn
        J = np.block([
            [dS_dVa.real[np.ix_(pvpq, pvpq)], dS_dVm.real[np.ix_(pvpq, pq)]],
            [dS_dVa.imag[np.ix_(pq, pvpq)], dS_dVm.imag[np.ix_(pq, pq)]],
        ])
        dx = np.linalg.solve(J, -f)
        va[pvpq] += dx[: len(pvpq)]
        vm[pq] += dx[len(pvpq):]
        it += 1


def vscaled_jacobian(Y, kind, vm, va):
    """Eq.-4 convention: V columns scaled by V_j, built from complex partials."""
    n = len(kind)
    pvpq = [i for i in range(n) if kind[i] != SLACK]
    pq = [i for i in range(n) if kind[i] == PQ]
    V = vm * np.exp(1j * va)
    Ibus = Y @ V
    dV = np.diag(V)
    dI = np.diag(Ibus)
    dVn = np.diag(V / np.abs(V))
    dS_dVa = 1j * dV @ np.conj(dI - Y @ dV)
    dS_dVm = (dV @ np.conj(Y @ dVn) + np.conj(dI) @ dVn) @ np.diag(vm)
    H = dS_dVa.real[np.ix_(pvpq, pvpq)]
    N = dS_dVm.real[np.ix_(pvpq, pq)]
    K = dS_dVa.imag[np.ix_(pq, pvpq)]
    L = dS_dVm.imag[np.ix_(pq, pq)]
    return np.block([[H, N], [K, L]])


def solve_case(case, load_scale=1.0):
    n, kind, pd, qd, gs, bs, vset, pg = prep(case)
    Y = ybus(case, n, gs, bs)
    p_target = pg - pd * load_scale
    q_target = -qd * load_scale
    res = newton(Y, kind, vset, p_target, q_target)
    return n, kind, pd, qd, gs, bs, vset, pg, Y, res


# ---------------------------------------------------------------------------
# Emission.
# ---------------------------------------------------------------------------

def fmt(v):
    return repr(float(v))


def write_case_file(case, path, load_scale=1.0, header=""):
    base = case["base_mva"]
    lines = []
    if header:
        lines.append("# " + header)
    lines.append("BASE_MVA " + fmt(base))
    lines.append("BUS")
    lines.append("# id kind Pd Qd Gs Bs Vset ThetaSet")
    gen_v = {b: v for (b, _, v) in case["gen"]}
    for (i, t, pdmw, qdmw, gsmvar, bsmvar, vset) in case["bus"]:
        v = gen_v.get(i, vset)
        lines.append(" ".join([
            str(i), str(t), fmt(pdmw * load_scale / base), fmt(qdmw * load_scale / base),
            fmt(gsmvar / base), fmt(bsmvar / base), fmt(v), "0",
        ]))
    lines.append("BRANCH")
    lines.append("# from to r x b tap status")
    for (f, t, r, x, b, tp) in case["branch"]:
        lines.append(" ".join([str(f), str(t), fmt(r), fmt(x), fmt(b),
                               fmt(tp if tp != 0.0 else 1.0), "1"]))
    lines.append("GEN")
    lines.append("# bus Pg Qg Vset")
    for (b, pgmw, v) in case["gen"]:
        lines.append(" ".join([str(b), fmt(pgmw / base), "0", fmt(v)]))
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path} ({len(case['bus'])} buses, {len(case['branch'])} branches)")


def solution_json(case, n, kind, vm, va, S, iters, iters8, mis, path):
    buses = []
    for i in range(n):
        buses.append({
            "id": i + 1,
            "kind": int(kind[i]),
            "vm": float(vm[i]),
            "va_rad": float(va[i]),
            "va_deg": float(math.degrees(va[i])),
            "p": float(S.real[i]),
            "q": float(S.imag[i]),
        })
    doc = {
        "case": case["name"],
        "base_mva": case["base_mva"],
        "tolerance": 1e-12,
        "iterations": iters,
        "iterations_to_1e-8": iters8,
        "final_mismatch": float(mis),
        "buses": buses,
    }
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    print(f"wrote {path}")


def main():
    cases_dir = ROOT / "data" / "cases"
    fix_dir = ROOT / "tests" / "fixtures"
    cases_dir.mkdir(parents=True, exist_ok=True)
    fix_dir.mkdir(parents=True, exist_ok=True)

    # ---- structural checks on the 118-bus tables
    assert len(CASE118_BUS) == 118
    assert len(CASE118_BRANCH) == 186
    assert len(CASE118_GEN) == 54
    dup = [b for b in CASE118_BRANCH if (b[0], b[1]) == (49, 66)]
    assert len(dup) == 2 and dup[0] == dup[1], "49-66 must appear twice, identical"
    gen_buses = [g[0] for g in CASE118_GEN]
    assert len(set(gen_buses)) == 54
    kinds = {i: t for (i, t, *_rest) in CASE118_BUS}
    assert kinds[69] == SLACK
    assert all(kinds[b] in (PV, SLACK) for b in gen_buses)
    assert kinds[49] == PV and kinds[66] == PV
    assert sum(1 for t in kinds.values() if t == PQ) == 64
    total_pd = sum(b[2] for b in CASE118_BUS)
    assert total_pd == 4242, f"total load {total_pd} MW, expected 4242"

    # ---- 9-bus
    n, kind, pd, qd, gs, bs, vset, pg, Y, res = solve_case(CASE9)
    assert res is not None, "ieee9 did not converge"
    vm, va, S, iters, iters8, mis = res
    assert iters8 is not None and iters8 <= 6, f"ieee9 iters@1e-8 = {iters8}"
    assert vm.min() > 0.94 and vm.max() < 1.06
    print(f"ieee9: iters@1e-8={iters8} total={iters} Vrange=[{vm.min():.4f},{vm.max():.4f}] "
          f"slackP={S.real[0]:.4f} losses={S.real.sum():.4f} pu")
    write_case_file(CASE9, cases_dir / "ieee9.case",
                    header="9-bus test system (3 generators, loads at 5/7/9, ties at 4/6/8)")
    write_case_file(CASE9, cases_dir / "ieee9_x100.case", load_scale=100.0,
                    header="9-bus system with loads scaled x100: infeasible, must not converge")
    solution_json(CASE9, n, kind, vm, va, S, iters, iters8, mis,
                  fix_dir / "ieee9_solution.json")

    entries = []
    for i in range(n):
        for j in range(n):
            if Y[i, j] != 0:
                entries.append([i + 1, j + 1, float(Y[i, j].real), float(Y[i, j].imag)])
    (fix_dir / "ieee9_ybus.json").write_text(
        json.dumps({"n": n, "entries": entries}, sort_keys=True) + "\n")
    print(f"wrote {fix_dir / 'ieee9_ybus.json'} ({len(entries)} nonzero entries)")

    # infeasible variant really is infeasible
    res_bad = solve_case(CASE9, load_scale=100.0)[-1]
    assert res_bad is None, "x100 case unexpectedly converged"
    print("ieee9_x100: diverges as intended")

    # ---- 118-bus
    n, kind, pd, qd, gs, bs, vset, pg, Y, res = solve_case(CASE118)
    assert res is not None, "ieee118 did not converge"
    vm, va, S, iters, iters8, mis = res
    losses = S.real.sum()
    print(f"ieee118: iters@1e-8={iters8} total={iters} Vrange=[{vm.min():.4f},{vm.max():.4f}] "
          f"slackP={S.real[68]:.4f} losses={losses * 100:.2f} MW "
          f"theta49={math.degrees(va[48]):.3f} theta66={math.degrees(va[65]):.3f}")
    assert iters8 is not None and iters8 <= 6, f"ieee118 iters@1e-8 = {iters8}"
    assert vm.min() > 0.92 and vm.max() < 1.06, "voltage profile implausible"
    assert 0.01 < losses < 0.04 * pd.sum() + 10, "loss level implausible"
    assert va[65] > va[48], "expected theta66 > theta49 at base case"
    write_case_file(CASE118, cases_dir / "ieee118.case",
                    header="118-bus test system, 186 branch records (49-66 circuit listed twice)")
    solution_json(CASE118, n, kind, vm, va, S, iters, iters8, mis,
                  fix_dir / "ieee118_solution.json")

    J = vscaled_jacobian(Y, kind, vm, va)
    p_dim = (n - 1) + int(np.sum(kind == PQ))
    assert J.shape == (p_dim, p_dim) == (181, 181)
    rows = [",".join(fmt(v) for v in row) for row in J]
    (fix_dir / "ieee118_jacobian0.csv").write_text("\n".join(rows) + "\n")
    print(f"wrote {fix_dir / 'ieee118_jacobian0.csv'} ({p_dim}x{p_dim})")

    # duplicated-branch experiment sanity: removing one 49-66 record changes
    # exactly the four theta/P entries over buses {49, 66}
    corr = dict(CASE118)
    corr_branches = list(CASE118_BRANCH)
    corr_branches.remove((49, 66, 0.018, 0.0919, 0.0248, 0.0))
    corr["branch"] = corr_branches
    nc, kindc, *_r, gsc, bsc = n, kind, pd, qd, gs, bs
    Yc = ybus(corr, n, gs, bs)
    Jc = vscaled_jacobian(Yc, kind, vm, va)
    D = J - Jc
    nz = np.argwhere(np.abs(D) > 1e-9)
    print(f"model-difference nonzeros: {len(nz)} (expect 4); "
          f"|D| corners: {[float(abs(D[r, c])) for r, c in nz]}")
    assert len(nz) == 4

    print("all fixture checks passed")


if __name__ == "__main__":
    main()
