#pragma once

#include <array>
#include <vector>

namespace ridg {

// Periodic uniform Cartesian mesh on an axis-aligned box. Cells are indexed
// row-major with axis 1 fastest; all index arithmetic wraps periodically.
struct CartesianMesh {
  int dim = 1;
  std::array<int, 3> cells{1, 1, 1};
  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};

  long total_cells() const {
    long n = 1;
    for (int a = 0; a < dim; ++a) n *= cells[a];
    return n;
  }
  double spacing(int axis) const { return (hi[axis] - lo[axis]) / cells[axis]; }
  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= spacing(a);
    return v;
  }
  double min_spacing() const {
    double h = spacing(0);
    for (int a = 1; a < dim; ++a) h = std::min(h, spacing(a));
    return h;
  }

  std::array<int, 3> coords(long cell) const;
  long flat(const std::array<int, 3>& c) const;  // wraps periodically
  long neighbor(long cell, int axis, int dir) const;
  // Cell shifted by the given per-axis offsets (each typically in {-1,0,1}).
  long offset_neighbor(long cell, const std::array<int, 3>& offset) const;
  // Center of the cell along each axis.
  std::array<double, 3> center(long cell) const;
};

CartesianMesh build_mesh(int dim, const std::array<int, 3>& cells_per_axis,
                         const std::array<double, 3>& lo,
                         const std::array<double, 3>& hi);

// One halo relation of a task: the owned cells it sends toward a neighbor
// offset and the neighbor-owned cells it receives for the mirror offset.
struct HaloMap {
  std::array<int, 3> offset{0, 0, 0};  // direction, entries in {-1,0,1}
  int neighbor_task = -1;
  std::vector<long> send_cells;  // global ids owned by this task
  std::vector<long> recv_cells;  // global ids owned by neighbor_task
};

struct TaskDomain {
  int task = -1;
  std::array<int, 3> task_coords{0, 0, 0};
  std::array<int, 3> cell_lo{0, 0, 0};  // inclusive, per axis
  std::array<int, 3> cell_hi{0, 0, 0};  // exclusive
  std::vector<long> owned_cells;        // global ids, row-major local order
  std::vector<int> face_neighbors;      // task ids, 2*dim entries
  std::vector<int> vertex_neighbors;    // task ids, 3^dim - 1 entries
  std::vector<HaloMap> halos;           // one per nonzero offset, 3^dim - 1
};

// Uniform block decomposition of a periodic mesh into a Cartesian grid of
// tasks, with width-1 halo maps covering face, edge, and corner neighbors.
struct Decomposition {
  CartesianMesh mesh;
  std::array<int, 3> tasks_per_axis{1, 1, 1};
  std::vector<TaskDomain> tasks;

  int task_count() const { return static_cast<int>(tasks.size()); }
  int owner_of(long cell) const;
};

Decomposition decompose(const CartesianMesh& mesh,
                        const std::array<int, 3>& tasks_per_axis);

}  // namespace ridg
