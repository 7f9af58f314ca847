#include "ridg/mesh.hpp"

#include <doctest.h>
#include <map>
#include <random>
#include <set>

#include "ridg/errors.hpp"

using namespace ridg;

namespace {

CartesianMesh unit_mesh(int dim, int n) {
  std::array<int, 3> cells{1, 1, 1};
  for (int a = 0; a < dim; ++a) cells[a] = n;
  return build_mesh(dim, cells, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
}

}  // namespace

TEST_CASE("periodic neighbors wrap in 1D") {
  const CartesianMesh m = unit_mesh(1, 3);
  CHECK(m.neighbor(0, 0, -1) == 2);
  CHECK(m.neighbor(0, 0, +1) == 1);
  CHECK(m.neighbor(2, 0, +1) == 0);
}

TEST_CASE("vertex neighbor counts match the region size") {
  const CartesianMesh m2 = unit_mesh(2, 5);
  std::set<long> nbrs2;
  for (int ox = -1; ox <= 1; ++ox)
    for (int oy = -1; oy <= 1; ++oy) {
      if (ox == 0 && oy == 0) continue;
      nbrs2.insert(m2.offset_neighbor(7, {ox, oy, 0}));
    }
  CHECK(nbrs2.size() == 8);

  const CartesianMesh m3 = unit_mesh(3, 4);
  std::set<long> region;
  for (int ox = -1; ox <= 1; ++ox)
    for (int oy = -1; oy <= 1; ++oy)
      for (int oz = -1; oz <= 1; ++oz)
        region.insert(m3.offset_neighbor(21, {ox, oy, oz}));
  CHECK(region.size() == 27);
}

TEST_CASE("spacing and volume") {
  const CartesianMesh m = build_mesh(2, {4, 8, 1}, {0.0, 0.0, 0.0},
                                     {2.0, 4.0, 1.0});
  CHECK(m.spacing(0) == doctest::Approx(0.5));
  CHECK(m.spacing(1) == doctest::Approx(0.5));
  CHECK(m.total_cells() == 32);
  CHECK(m.cell_volume() == doctest::Approx(0.25));
}

TEST_CASE("build_mesh validation") {
  CHECK_THROWS_AS(build_mesh(1, {0, 1, 1}, {0, 0, 0}, {1, 1, 1}),
                  ValidationError);
  CHECK_THROWS_AS(build_mesh(4, {2, 2, 2}, {0, 0, 0}, {1, 1, 1}),
                  ValidationError);
  CHECK_THROWS_AS(build_mesh(1, {5, 1, 1}, {0, 0, 0}, {0, 1, 1}),
                  ValidationError);
}

TEST_CASE("decomposition block sizes match the scaling studies") {
  const CartesianMesh m2 = unit_mesh(2, 60);
  const Decomposition d2 = decompose(m2, {6, 6, 1});
  CHECK(d2.task_count() == 36);
  for (const TaskDomain& td : d2.tasks) CHECK(td.owned_cells.size() == 100);

  const CartesianMesh m3 = unit_mesh(3, 48);
  const Decomposition d3 = decompose(m3, {3, 3, 3});
  CHECK(d3.task_count() == 27);
  for (const TaskDomain& td : d3.tasks)
    CHECK(td.owned_cells.size() == 16 * 16 * 16);
}

TEST_CASE("single task wraps onto itself") {
  const CartesianMesh m = unit_mesh(2, 8);
  const Decomposition d = decompose(m, {1, 1, 1});
  REQUIRE(d.task_count() == 1);
  const TaskDomain& td = d.tasks[0];
  CHECK(td.owned_cells.size() == 64);
  CHECK(td.vertex_neighbors.size() == 8);
  for (int nb : td.vertex_neighbors) CHECK(nb == 0);
  for (const HaloMap& hm : td.halos) CHECK(hm.neighbor_task == 0);
}

TEST_CASE("non-divisible decompositions are rejected with the axis named") {
  const CartesianMesh m = unit_mesh(2, 10);
  CHECK_THROWS_WITH_AS(decompose(m, {3, 2, 1}),
                       doctest::Contains("does not divide"), ValidationError);
}

TEST_CASE("vertex neighbor list has 3^d - 1 entries") {
  const CartesianMesh m = unit_mesh(3, 6);
  const Decomposition d = decompose(m, {2, 3, 1});
  for (const TaskDomain& td : d.tasks) {
    CHECK(td.vertex_neighbors.size() == 26);
    CHECK(td.face_neighbors.size() == 6);
    CHECK(td.halos.size() == 26);
  }
}

TEST_CASE("ownership partitions the mesh") {
  const CartesianMesh m = unit_mesh(3, 12);
  const Decomposition d = decompose(m, {2, 2, 3});
  std::set<long> seen;
  long total = 0;
  for (const TaskDomain& td : d.tasks) {
    total += static_cast<long>(td.owned_cells.size());
    for (long c : td.owned_cells) {
      CHECK(seen.insert(c).second);
      CHECK(d.owner_of(c) == td.task);
    }
  }
  CHECK(total == m.total_cells());
}

TEST_CASE("face and vertex neighbor relations are symmetric") {
  const CartesianMesh m = unit_mesh(2, 12);
  const Decomposition d = decompose(m, {4, 3, 1});
  std::map<std::pair<int, int>, int> face_count, vertex_count;
  for (const TaskDomain& td : d.tasks) {
    for (int nb : td.face_neighbors) face_count[{td.task, nb}]++;
    for (int nb : td.vertex_neighbors) vertex_count[{td.task, nb}]++;
  }
  for (const auto& [key, count] : face_count)
    CHECK(face_count[{key.second, key.first}] == count);
  for (const auto& [key, count] : vertex_count)
    CHECK(vertex_count[{key.second, key.first}] == count);
}

TEST_CASE("send lists mirror the neighbor's receive lists") {
  for (int dim = 1; dim <= 3; ++dim) {
    std::array<int, 3> cells{1, 1, 1}, grid{1, 1, 1};
    const int n = dim == 3 ? 12 : 24;
    for (int a = 0; a < dim; ++a) cells[a] = n;
    grid[0] = 2;
    if (dim >= 2) grid[1] = 3;
    if (dim >= 3) grid[2] = 2;
    const CartesianMesh m = build_mesh(dim, cells, {0, 0, 0}, {1, 1, 1});
    const Decomposition d = decompose(m, grid);
    for (const TaskDomain& td : d.tasks)
      for (const HaloMap& hm : td.halos) {
        // find the neighbor's halo pointing back at us
        const TaskDomain& nb = d.tasks[hm.neighbor_task];
        std::array<int, 3> back{-hm.offset[0], -hm.offset[1], -hm.offset[2]};
        const HaloMap* mirror = nullptr;
        for (const HaloMap& other : nb.halos)
          if (other.offset == back && other.neighbor_task == td.task)
            mirror = &other;
        REQUIRE(mirror != nullptr);
        CHECK(hm.recv_cells == mirror->send_cells);
        CHECK(hm.send_cells == mirror->recv_cells);
      }
  }
}

TEST_CASE("halo round trip reproduces the field") {
  // Sending every halo and writing every received strip back must agree with
  // a direct periodic copy of the neighbor data.
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int dim = 1; dim <= 3; ++dim) {
    std::array<int, 3> cells{1, 1, 1}, grid{1, 1, 1};
    for (int a = 0; a < dim; ++a) cells[a] = 6;
    for (int a = 0; a < dim; ++a) grid[a] = (a == 0) ? 3 : 2;
    const CartesianMesh m = build_mesh(dim, cells, {0, 0, 0}, {1, 1, 1});
    const Decomposition d = decompose(m, grid);

    std::vector<double> field(m.total_cells());
    for (double& v : field) v = uni(rng);

    for (const TaskDomain& td : d.tasks)
      for (const HaloMap& hm : td.halos) {
        // pack from the sender's owned data, deliver into the receiver copy
        std::vector<double> payload;
        const TaskDomain& nb = d.tasks[hm.neighbor_task];
        const HaloMap* mirror = nullptr;
        for (const HaloMap& other : nb.halos) {
          std::array<int, 3> back{-hm.offset[0], -hm.offset[1], -hm.offset[2]};
          if (other.offset == back && other.neighbor_task == td.task)
            mirror = &other;
        }
        REQUIRE(mirror != nullptr);
        for (long c : mirror->send_cells) payload.push_back(field[c]);
        REQUIRE(payload.size() == hm.recv_cells.size());
        for (size_t i = 0; i < payload.size(); ++i)
          CHECK(payload[i] == field[hm.recv_cells[i]]);
      }
  }
}
