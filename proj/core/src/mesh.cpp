#include "ridg/mesh.hpp"

#include <algorithm>
#include <string>

#include "ridg/errors.hpp"

namespace ridg {

namespace {
inline int wrap(int i, int n) {
  int r = i % n;
  return r < 0 ? r + n : r;
}
}  // namespace

std::array<int, 3> CartesianMesh::coords(long cell) const {
  std::array<int, 3> c{0, 0, 0};
  long rem = cell;
  for (int a = 0; a < dim; ++a) {
    c[a] = static_cast<int>(rem % cells[a]);
    rem /= cells[a];
  }
  return c;
}

long CartesianMesh::flat(const std::array<int, 3>& c) const {
  long k = 0;
  for (int a = dim - 1; a >= 0; --a) k = k * cells[a] + wrap(c[a], cells[a]);
  return k;
}

long CartesianMesh::neighbor(long cell, int axis, int dir) const {
  std::array<int, 3> c = coords(cell);
  c[axis] += dir;
  return flat(c);
}

long CartesianMesh::offset_neighbor(long cell, const std::array<int, 3>& offset) const {
  std::array<int, 3> c = coords(cell);
  for (int a = 0; a < dim; ++a) c[a] += offset[a];
  return flat(c);
}

std::array<double, 3> CartesianMesh::center(long cell) const {
  std::array<int, 3> c = coords(cell);
  std::array<double, 3> x{0.0, 0.0, 0.0};
  for (int a = 0; a < dim; ++a) x[a] = lo[a] + (c[a] + 0.5) * spacing(a);
  return x;
}

CartesianMesh build_mesh(int dim, const std::array<int, 3>& cells_per_axis,
                         const std::array<double, 3>& lo,
                         const std::array<double, 3>& hi) {
  if (dim < 1 || dim > 3) throw ValidationError("build_mesh: dim must be in [1,3]");
  for (int a = 0; a < dim; ++a) {
    if (cells_per_axis[a] < 1)
      throw ValidationError("build_mesh: cells_per_axis must be >= 1 (axis " +
                            std::to_string(a + 1) + ")");
    if (!(hi[a] > lo[a]))
      throw ValidationError("build_mesh: domain extent must be positive (axis " +
                            std::to_string(a + 1) + ")");
  }
  CartesianMesh mesh;
  mesh.dim = dim;
  mesh.cells = cells_per_axis;
  mesh.lo = lo;
  mesh.hi = hi;
  for (int a = dim; a < 3; ++a) {
    mesh.cells[a] = 1;
    mesh.lo[a] = 0.0;
    mesh.hi[a] = 1.0;
  }
  return mesh;
}

int Decomposition::owner_of(long cell) const {
  std::array<int, 3> c = mesh.coords(cell);
  int t = 0;
  for (int a = mesh.dim - 1; a >= 0; --a) {
    int block = mesh.cells[a] / tasks_per_axis[a];
    t = t * tasks_per_axis[a] + c[a] / block;
  }
  return t;
}

Decomposition decompose(const CartesianMesh& mesh,
                        const std::array<int, 3>& tasks_per_axis) {
  const int dim = mesh.dim;
  for (int a = 0; a < dim; ++a) {
    if (tasks_per_axis[a] < 1)
      throw ValidationError("decompose: tasks_per_axis must be >= 1");
    if (mesh.cells[a] % tasks_per_axis[a] != 0)
      throw ValidationError("decompose: tasks_per_axis (" +
                            std::to_string(tasks_per_axis[a]) +
                            ") does not divide cells (" +
                            std::to_string(mesh.cells[a]) + ") on axis " +
                            std::to_string(a + 1));
  }

  Decomposition dec;
  dec.mesh = mesh;
  dec.tasks_per_axis = tasks_per_axis;
  for (int a = dim; a < 3; ++a) dec.tasks_per_axis[a] = 1;

  int ntasks = 1;
  std::array<int, 3> block{1, 1, 1};
  for (int a = 0; a < dim; ++a) {
    ntasks *= dec.tasks_per_axis[a];
    block[a] = mesh.cells[a] / dec.tasks_per_axis[a];
  }

  auto task_flat = [&](const std::array<int, 3>& tc) {
    int t = 0;
    for (int a = dim - 1; a >= 0; --a)
      t = t * dec.tasks_per_axis[a] + wrap(tc[a], dec.tasks_per_axis[a]);
    return t;
  };

  // Row-major enumeration of the cells in a sub-box of the task block.
  auto strip_cells = [&](const TaskDomain& td, const std::array<int, 3>& offset,
                         bool outward) {
    std::array<int, 3> slo{0, 0, 0}, shi{1, 1, 1};
    for (int a = 0; a < dim; ++a) {
      if (offset[a] == 0) {
        slo[a] = td.cell_lo[a];
        shi[a] = td.cell_hi[a];
      } else {
        // outward: the owned layer facing the neighbor; inward: the layer a
        // neighbor in that direction sends back (same side of the block).
        int side = outward ? offset[a] : -offset[a];
        int c = (side > 0) ? td.cell_hi[a] - 1 : td.cell_lo[a];
        slo[a] = c;
        shi[a] = c + 1;
      }
    }
    std::vector<long> out;
    std::array<int, 3> c = slo;
    for (;;) {
      out.push_back(mesh.flat(c));
      int a = 0;
      for (; a < dim; ++a) {
        if (++c[a] < shi[a]) break;
        c[a] = slo[a];
      }
      if (a == dim) break;
    }
    return out;
  };

  dec.tasks.resize(ntasks);
  for (int t = 0; t < ntasks; ++t) {
    TaskDomain& td = dec.tasks[t];
    td.task = t;
    int rem = t;
    for (int a = 0; a < dim; ++a) {
      td.task_coords[a] = rem % dec.tasks_per_axis[a];
      rem /= dec.tasks_per_axis[a];
      td.cell_lo[a] = td.task_coords[a] * block[a];
      td.cell_hi[a] = td.cell_lo[a] + block[a];
    }
    for (int a = dim; a < 3; ++a) {
      td.cell_lo[a] = 0;
      td.cell_hi[a] = 1;
    }

    std::array<int, 3> c = td.cell_lo;
    for (;;) {
      td.owned_cells.push_back(mesh.flat(c));
      int a = 0;
      for (; a < dim; ++a) {
        if (++c[a] < td.cell_hi[a]) break;
        c[a] = td.cell_lo[a];
      }
      if (a == dim) break;
    }

    for (int a = 0; a < dim; ++a)
      for (int dir : {-1, +1}) {
        std::array<int, 3> tc = td.task_coords;
        tc[a] += dir;
        td.face_neighbors.push_back(task_flat(tc));
      }

    // All nonzero offsets, axis 1 fastest; repeats are kept when the task
    // grid wraps onto itself.
    int noff = 1;
    for (int a = 0; a < dim; ++a) noff *= 3;
    for (int o = 0; o < noff; ++o) {
      std::array<int, 3> offset{0, 0, 0};
      int orem = o;
      bool zero = true;
      for (int a = 0; a < dim; ++a) {
        offset[a] = orem % 3 - 1;
        orem /= 3;
        if (offset[a] != 0) zero = false;
      }
      if (zero) continue;
      std::array<int, 3> tc = td.task_coords;
      for (int a = 0; a < dim; ++a) tc[a] += offset[a];
      const int nb = task_flat(tc);
      td.vertex_neighbors.push_back(nb);

      HaloMap hm;
      hm.offset = offset;
      hm.neighbor_task = nb;
      hm.send_cells = strip_cells(td, offset, /*outward=*/true);
      td.halos.push_back(std::move(hm));
    }
  }

  // Receive lists mirror the neighbor's send list for the opposite offset,
  // which guarantees matching payload order on both ends.
  for (TaskDomain& td : dec.tasks) {
    for (HaloMap& hm : td.halos) {
      const TaskDomain& nb = dec.tasks[hm.neighbor_task];
      hm.recv_cells = strip_cells(nb, hm.offset, /*outward=*/false);
    }
  }

  return dec;
}

}  // namespace ridg
