from ..utils import ObjParseError
from .geometry import Triangle


def load_obj(path):
    """Reads triangles from a minimal Wavefront OBJ file.

    Only `v x y z` and triangular `f a b c` records are supported. Face indices are 1-based
    and positive; `a/b/c` style index groups are accepted and only the vertex index is used.
    Comments (`#`), blank lines and other record types (`vn`, `vt`, `o`, `g`, `s`, `usemtl`,
    `mtllib`) are ignored.

    Args:
        path (str): path to the OBJ file

    Returns:
        list: Triangle objects in file order with sequential ids starting at 0
    """
    vertices = []
    triangles = []
    with open(path, 'r') as f:
        for line_number, line in enumerate(f, start=1):
            toks = line.split('#', 1)[0].split()
            if not toks:
                continue

            if toks[0] == 'v':
                if len(toks) < 4:
                    raise ObjParseError(f"{path}:{line_number}: vertex record needs 3 coordinates.")
                try:
                    vertices.append(tuple(float(c) for c in toks[1:4]))
                except ValueError:
                    raise ObjParseError(f"{path}:{line_number}: malformed vertex coordinates.") from None

            elif toks[0] == 'f':
                if len(toks) != 4:
                    raise ObjParseError(f"{path}:{line_number}: non-triangular face ({len(toks) - 1} vertices).")
                indices = []
                for tok in toks[1:]:
                    try:
                        index = int(tok.split('/')[0])
                    except ValueError:
                        raise ObjParseError(f"{path}:{line_number}: malformed face index '{tok}'.") from None
                    if index < 1 or index > len(vertices):
                        raise ObjParseError(f"{path}:{line_number}: face index {index} out of range "
                                            f"(1..{len(vertices)}).")
                    indices.append(index - 1)
                try:
                    triangles.append(Triangle(*(vertices[i] for i in indices), id=len(triangles)))
                except ValueError as e:
                    raise ObjParseError(f"{path}:{line_number}: {e}") from None

    return triangles


def save_obj(triangles, path):
    """Writes triangles to an OBJ file (one `v` per vertex, no vertex sharing).

    Args:
        triangles (list): Triangle objects
        path (str): output path
    """
    with open(path, 'w') as f:
        for tri in triangles:
            for v in tri.vertices:
                f.write(f"v {v[0]!r} {v[1]!r} {v[2]!r}\n")
        for i in range(len(triangles)):
            f.write(f"f {3*i + 1} {3*i + 2} {3*i + 3}\n")
