#pragma once

// Sparse truncated-signed-distance grid with projective ray integration and
// adaptive weighting for growing surfaces.
//
// Sign convention: D > 0 in front of the surface (outside the material,
// toward the sensor), D < 0 behind it.

#include "amfuse/geomcore.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <unordered_map>
#include <vector>

namespace amfuse::fusion {

using geom::Point3;

struct VoxelKey {
    std::int32_t x = 0, y = 0, z = 0;
    bool operator==(const VoxelKey&) const = default;
    auto operator<=>(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
    std::size_t operator()(const VoxelKey& k) const noexcept
    {
        std::uint64_t h = static_cast<std::uint32_t>(k.x) * 0x9E3779B97F4A7C15ull;
        h ^= static_cast<std::uint32_t>(k.y) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
        h ^= static_cast<std::uint32_t>(k.z) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

inline constexpr int kBlockDim = 8;
inline constexpr int kBlockVoxels = kBlockDim * kBlockDim * kBlockDim;

/// Leaf block of 8^3 voxels, x fastest. W == 0 marks an unobserved voxel.
struct LeafBlock {
    std::array<double, kBlockVoxels> D{};
    std::array<double, kBlockVoxels> W{};
};

struct VoxelRecord {
    double D = 0.0;
    double W = 0.0;
};

/// Floor division helpers for the voxel -> block mapping.
inline VoxelKey block_of(const VoxelKey& v)
{
    auto fd = [](std::int32_t a) { return a >= 0 ? a / kBlockDim : -((-a + kBlockDim - 1) / kBlockDim); };
    return {fd(v.x), fd(v.y), fd(v.z)};
}
inline int local_index(const VoxelKey& v)
{
    auto md = [](std::int32_t a) { return ((a % kBlockDim) + kBlockDim) % kBlockDim; };
    return md(v.x) + kBlockDim * (md(v.y) + kBlockDim * md(v.z));
}

enum class RegionKind { active, inactive };

/// Measurement weight as a function of projective distance d (mm).
/// inactive: 1 for d < 0, 1 - d/delta on [0, delta], 0 beyond.
/// active:   1 for d <= delta, 0 beyond (the band 0 <= d <= delta is
///           fully weighted so fresh growth is not averaged away).
double weight_for(double d, RegionKind region, double delta);

struct FusionParams {
    double voxel_size = 2.0;       // mm
    double truncation = 6.0;       // delta, mm
    double w_max = 128.0;          // cap on accumulated weight
    double w_cap = 0.5;            // prior weight retained when an active voxel changes
    double change_threshold = 0.25; // |d - D_prev| (mm) that marks an active voxel as changed

    /// Throws std::invalid_argument on inconsistent values.
    void validate() const;
};

/// Neighbourhood of the current deposition spot. Membership is by
/// horizontal distance, so the region is a vertical cylinder.
struct ActiveRegion {
    Point3 center{};
    double radius = 10.0;

    bool contains(const Point3& p) const
    {
        const double dx = p.x - center.x, dy = p.y - center.y;
        return dx * dx + dy * dy <= radius * radius;
    }
};

/// Recentres the region on the nozzle; the z coordinate becomes
/// `surface_z` when known (the nozzle's hit on the reconstructed surface),
/// else the nozzle z.
ActiveRegion update_active_region(const ActiveRegion& region, const Point3& nozzle_pos,
                                  std::optional<double> surface_z = std::nullopt);

struct IntegrationStats {
    std::size_t points = 0;
    std::size_t skipped_nonfinite = 0;
    std::size_t active_points = 0;
    std::size_t voxel_updates = 0;

    IntegrationStats& operator+=(const IntegrationStats& o)
    {
        points += o.points;
        skipped_nonfinite += o.skipped_nonfinite;
        active_points += o.active_points;
        voxel_updates += o.voxel_updates;
        return *this;
    }
};

/// Immutable point-in-time view of a grid. Cheap to copy.
class GridView {
public:
    using BlockPtr = std::shared_ptr<const LeafBlock>;
    struct Entry {
        VoxelKey key;
        BlockPtr block;
    };

    GridView() = default;
    GridView(double voxel_size, double truncation, std::vector<Entry> blocks);

    double voxel_size() const { return voxel_size_; }
    double truncation() const { return truncation_; }
    std::size_t block_count() const { return blocks_ ? blocks_->size() : 0; }
    /// Blocks sorted by key.
    std::span<const Entry> blocks() const;

    const LeafBlock* find_block(const VoxelKey& block_key) const;
    std::optional<VoxelRecord> voxel(const VoxelKey& key) const;

    Point3 voxel_center(const VoxelKey& k) const
    {
        return {k.x * voxel_size_, k.y * voxel_size_, k.z * voxel_size_};
    }

    /// Trilinear interpolation of D at p; empty if any of the 8
    /// surrounding voxels is unobserved.
    std::optional<double> interpolate(const Point3& p) const;

    /// Height of the zero crossing in the voxel column through (x, y),
    /// searched within +-search mm of z_hint. Empty when not observed.
    std::optional<double> surface_height(double x, double y, double z_hint, double search) const;

    std::size_t observed_voxel_count() const;

private:
    double voxel_size_ = 2.0;
    double truncation_ = 6.0;
    std::shared_ptr<const std::vector<Entry>> blocks_;
    std::shared_ptr<const std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash>> index_;
};

/// Sparse TSDF volume. Integration is thread-safe: updates of a single
/// leaf block are serialised by a per-block mutex, block allocation by a
/// reader/writer lock on the block map. Snapshots are copy-on-write at
/// block granularity.
class SparseTsdfGrid {
public:
    explicit SparseTsdfGrid(const FusionParams& params = {});
    SparseTsdfGrid(const SparseTsdfGrid&) = delete;
    SparseTsdfGrid& operator=(const SparseTsdfGrid&) = delete;

    const FusionParams& params() const { return params_; }

    VoxelKey key_of(const Point3& p) const;
    Point3 voxel_center(const VoxelKey& k) const;

    /// Casts a ray from `sensor_origin` to every point and updates the
    /// voxels within +-delta of the hit. Non-finite points are skipped and
    /// counted. With `active == nullptr` every point is treated as inactive.
    IntegrationStats integrate_frame(const Point3& sensor_origin, std::span<const Point3> points,
                                     const ActiveRegion* active = nullptr);

    /// Same, with one ray origin per point (parallel-beam profilers).
    IntegrationStats integrate_rays(std::span<const Point3> origins, std::span<const Point3> points,
                                    const ActiveRegion* active = nullptr);

    /// Applies one measurement (d, w) to a voxel with the grid's update rule.
    void update_voxel(const VoxelKey& key, double d, double w, bool active);

    /// Overwrites a voxel (used to build reference grids directly).
    void assign(const VoxelKey& key, const VoxelRecord& rec);

    std::optional<VoxelRecord> voxel(const VoxelKey& key) const;
    std::size_t block_count() const;

    GridView snapshot() const;

private:
    struct Slot {
        std::mutex mutex;
        std::shared_ptr<LeafBlock> block;
    };
    using SlotMap = std::unordered_map<VoxelKey, std::unique_ptr<Slot>, VoxelKeyHash>;

    Slot& slot_for(const VoxelKey& block_key);
    Slot* find_slot(const VoxelKey& block_key) const;
    static LeafBlock& writable(Slot& slot);

    void integrate_ray(const Point3& origin, const Point3& hit, bool active, IntegrationStats& stats);

    FusionParams params_;
    mutable std::shared_mutex map_mutex_;
    SlotMap slots_;
};

/// Binary grid file: "ATSD", uint32 version (1), float64 voxel_size,
/// float64 truncation, uint64 block count, then per block 3 x int32 block
/// key followed by 512 (float32 D, float32 W) pairs, x fastest. All
/// little-endian.
void save_grid(const std::filesystem::path& path, const GridView& view);
GridView load_grid(const std::filesystem::path& path);

}  // namespace amfuse::fusion
