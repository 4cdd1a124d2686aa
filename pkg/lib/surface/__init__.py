from lib.surface.mesh import (Mesh, MeshJob, extract, extract_implicit, factor_sheet_vertices, flag_singularities,
                              label_components)
