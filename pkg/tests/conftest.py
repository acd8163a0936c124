import os
import sys
sys.path.insert(0, os.path.realpath(os.path.join(os.path.dirname(__file__), '..')))

import pytest

import RTSIM
from RTSIM.bvh import TreeNode, layout_tree
from RTSIM.scene import Triangle, Ray


def _hit_triangle(x, tid):
    return Triangle((x, -1.0, -1.0), (x, 1.0, -1.0), (x, 0.0, 2.0), id=tid)


def _near_miss_triangle(x, tid):
    # the box contains the ray, the triangle does not
    return Triangle((x, -1.0, -1.0), (x, 1.0, -1.0), (x, 1.0, 0.5), id=tid)


def _box_missed_triangle(x, tid):
    return Triangle((x, 9.0, -1.0), (x, 11.0, -1.0), (x, 10.0, 2.0), id=tid)


class WalkthroughTree:
    """16-node example tree traced by a ray along +x.

    A: [B, C, D], B: [E, F, G], D: [H, I], I: [J], J: [K, L, M], M: [N, O, P].
    C and G are missed by the ray, P holds the only hit triangle (t = 15), the other
    leaves are near misses.
    """
    def __init__(self):
        leaf_x = {'C': 1.0, 'E': 5.0, 'F': 6.0, 'G': 7.0, 'H': 8.0, 'K': 9.0,
                  'L': 10.0, 'N': 11.0, 'O': 12.0, 'P': 15.0}
        self.triangles = []
        nodes = {}
        for tid, (name, x) in enumerate(sorted(leaf_x.items())):
            if name == 'P':
                tri = _hit_triangle(x, tid)
            elif name in ('C', 'G'):
                tri = _box_missed_triangle(x, tid)
            else:
                tri = _near_miss_triangle(x, tid)
            self.triangles.append(tri)
            nodes[name] = TreeNode(triangle=tri)

        nodes['M'] = TreeNode(children=[nodes['N'], nodes['O'], nodes['P']])
        nodes['J'] = TreeNode(children=[nodes['K'], nodes['L'], nodes['M']])
        nodes['I'] = TreeNode(children=[nodes['J']])
        nodes['D'] = TreeNode(children=[nodes['H'], nodes['I']])
        nodes['B'] = TreeNode(children=[nodes['E'], nodes['F'], nodes['G']])
        nodes['A'] = TreeNode(children=[nodes['B'], nodes['C'], nodes['D']])

        self.bvh = layout_tree(nodes['A'])
        self.addr = {name: node.addr for name, node in nodes.items()}
        self.name = {addr: name for name, addr in self.addr.items()}
        self.ray = Ray((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
        self.hit_id = next(tri.id for tri in self.triangles if tri.v0[0] == 15.0)

    def names(self, addrs):
        return [self.name[a] for a in addrs]


@pytest.fixture
def walkthrough():
    return WalkthroughTree()


@pytest.fixture
def small_config():
    """A few warps on two SMs, primary rays and one bounce."""
    return RTSIM.apply_overrides(RTSIM.SimConfig(), {
        'scene': 'synthetic:random-boxes:128:3',
        'width': 4, 'height': 4,
        'sm_count': 2,
        'rt.warp_size': 4,
        'bounce_depth': 1,
    })


@pytest.fixture
def single_ray_config():
    return RTSIM.apply_overrides(RTSIM.SimConfig(), {
        'scene': 'synthetic:random-boxes:256:0',
        'width': 1, 'height': 1,
        'sm_count': 1,
        'rt.warp_size': 1,
        'bounce_depth': 0,
    })
