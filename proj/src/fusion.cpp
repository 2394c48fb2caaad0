#include "amfuse/fusion.hpp"

#include "amfuse/error.hpp"
#include "amfuse/simd/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace amfuse::fusion {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Scratch buffers for one ray's batch of voxel updates.
struct RayScratch {
    std::vector<VoxelKey> keys;
    std::vector<double> dist;
    std::vector<double> D, W, d, w, cap;
    std::vector<int> local;
};

RayScratch& scratch()
{
    thread_local RayScratch s;
    return s;
}

}  // namespace

double weight_for(double d, RegionKind region, double delta)
{
    if (!(delta > 0.0))
        throw std::invalid_argument("weight_for: truncation must be positive");
    if (d < 0.0)
        return 1.0;
    if (d > delta)
        return 0.0;
    if (region == RegionKind::active)
        return 1.0;
    return 1.0 - d / delta;
}

void FusionParams::validate() const
{
    if (!(voxel_size > 0.0))
        throw std::invalid_argument("voxel_size must be positive");
    if (!(truncation >= voxel_size))
        throw std::invalid_argument("truncation must be at least one voxel");
    if (!(w_max > 0.0))
        throw std::invalid_argument("w_max must be positive");
    if (!(w_cap >= 0.0))
        throw std::invalid_argument("w_cap must be non-negative");
    if (!(change_threshold > 0.0))
        throw std::invalid_argument("change_threshold must be positive");
}

ActiveRegion update_active_region(const ActiveRegion& region, const Point3& nozzle_pos, std::optional<double> surface_z)
{
    ActiveRegion out = region;
    out.center = {nozzle_pos.x, nozzle_pos.y, surface_z.value_or(nozzle_pos.z)};
    return out;
}

// ---------------------------------------------------------------------------
// GridView

GridView::GridView(double voxel_size, double truncation, std::vector<Entry> blocks)
    : voxel_size_(voxel_size), truncation_(truncation)
{
    std::sort(blocks.begin(), blocks.end(), [](const Entry& a, const Entry& b) { return a.key < b.key; });
    auto index = std::make_shared<std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash>>();
    index->reserve(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i)
        index->emplace(blocks[i].key, i);
    blocks_ = std::make_shared<const std::vector<Entry>>(std::move(blocks));
    index_ = std::move(index);
}

std::span<const GridView::Entry> GridView::blocks() const
{
    if (!blocks_)
        return {};
    return *blocks_;
}

const LeafBlock* GridView::find_block(const VoxelKey& block_key) const
{
    if (!index_)
        return nullptr;
    auto it = index_->find(block_key);
    return it == index_->end() ? nullptr : (*blocks_)[it->second].block.get();
}

std::optional<VoxelRecord> GridView::voxel(const VoxelKey& key) const
{
    const LeafBlock* b = find_block(block_of(key));
    if (!b)
        return std::nullopt;
    const int li = local_index(key);
    if (!(b->W[static_cast<std::size_t>(li)] > 0.0))
        return std::nullopt;
    return VoxelRecord{b->D[static_cast<std::size_t>(li)], b->W[static_cast<std::size_t>(li)]};
}

std::optional<double> GridView::interpolate(const Point3& p) const
{
    const double gx = p.x / voxel_size_, gy = p.y / voxel_size_, gz = p.z / voxel_size_;
    const double fx = std::floor(gx), fy = std::floor(gy), fz = std::floor(gz);
    const auto bx = static_cast<std::int32_t>(fx), by = static_cast<std::int32_t>(fy),
               bz = static_cast<std::int32_t>(fz);
    const double u = gx - fx, v = gy - fy, w = gz - fz;
    double acc = 0.0;
    for (int c = 0; c < 8; ++c) {
        const int ox = c & 1, oy = (c >> 1) & 1, oz = (c >> 2) & 1;
        const auto rec = voxel({bx + ox, by + oy, bz + oz});
        if (!rec)
            return std::nullopt;
        const double wt = (ox ? u : 1 - u) * (oy ? v : 1 - v) * (oz ? w : 1 - w);
        acc += wt * rec->D;
    }
    return acc;
}

std::optional<double> GridView::surface_height(double x, double y, double z_hint, double search) const
{
    const auto ix = static_cast<std::int32_t>(std::lround(x / voxel_size_));
    const auto iy = static_cast<std::int32_t>(std::lround(y / voxel_size_));
    const auto k_top = static_cast<std::int32_t>(std::ceil((z_hint + search) / voxel_size_));
    const auto k_bot = static_cast<std::int32_t>(std::floor((z_hint - search) / voxel_size_));
    for (std::int32_t k = k_top; k > k_bot; --k) {
        const auto above = voxel({ix, iy, k});
        const auto below = voxel({ix, iy, k - 1});
        if (!above || !below)
            continue;
        if (above->D >= 0.0 && below->D < 0.0) {
            const double t = above->D / (above->D - below->D);
            return (static_cast<double>(k) - t) * voxel_size_;
        }
    }
    return std::nullopt;
}

std::size_t GridView::observed_voxel_count() const
{
    std::size_t n = 0;
    for (const Entry& e : blocks())
        for (double w : e.block->W)
            n += w > 0.0 ? 1 : 0;
    return n;
}

// ---------------------------------------------------------------------------
// SparseTsdfGrid

SparseTsdfGrid::SparseTsdfGrid(const FusionParams& params) : params_(params) { params_.validate(); }

VoxelKey SparseTsdfGrid::key_of(const Point3& p) const
{
    const double s = params_.voxel_size;
    return {static_cast<std::int32_t>(std::floor(p.x / s + 0.5)), static_cast<std::int32_t>(std::floor(p.y / s + 0.5)),
            static_cast<std::int32_t>(std::floor(p.z / s + 0.5))};
}

Point3 SparseTsdfGrid::voxel_center(const VoxelKey& k) const
{
    const double s = params_.voxel_size;
    return {k.x * s, k.y * s, k.z * s};
}

SparseTsdfGrid::Slot* SparseTsdfGrid::find_slot(const VoxelKey& block_key) const
{
    std::shared_lock lock(map_mutex_);
    auto it = slots_.find(block_key);
    return it == slots_.end() ? nullptr : it->second.get();
}

SparseTsdfGrid::Slot& SparseTsdfGrid::slot_for(const VoxelKey& block_key)
{
    if (Slot* s = find_slot(block_key))
        return *s;
    std::unique_lock lock(map_mutex_);
    auto& slot = slots_[block_key];
    if (!slot) {
        slot = std::make_unique<Slot>();
        slot->block = std::make_shared<LeafBlock>();
    }
    return *slot;
}

LeafBlock& SparseTsdfGrid::writable(Slot& slot)
{
    // Caller holds slot.mutex. A count above one means a snapshot shares
    // the block; detach before writing.
    if (slot.block.use_count() > 1)
        slot.block = std::make_shared<LeafBlock>(*slot.block);
    return *slot.block;
}

void SparseTsdfGrid::update_voxel(const VoxelKey& key, double d, double w, bool active)
{
    if (!(w > 0.0))
        return;
    Slot& slot = slot_for(block_of(key));
    std::lock_guard guard(slot.mutex);
    LeafBlock& b = writable(slot);
    const auto li = static_cast<std::size_t>(local_index(key));
    double cap = kInf;
    if (active && b.W[li] > 0.0 && std::abs(d - b.D[li]) > params_.change_threshold)
        cap = params_.w_cap;
    simd::fuse_tsdf({std::span<double>(&b.D[li], 1), std::span<double>(&b.W[li], 1), std::span<const double>(&d, 1),
                     std::span<const double>(&w, 1), std::span<const double>(&cap, 1), params_.w_max});
}

void SparseTsdfGrid::assign(const VoxelKey& key, const VoxelRecord& rec)
{
    Slot& slot = slot_for(block_of(key));
    std::lock_guard guard(slot.mutex);
    LeafBlock& b = writable(slot);
    const auto li = static_cast<std::size_t>(local_index(key));
    b.D[li] = rec.D;
    b.W[li] = rec.W;
}

std::optional<VoxelRecord> SparseTsdfGrid::voxel(const VoxelKey& key) const
{
    Slot* slot = find_slot(block_of(key));
    if (!slot)
        return std::nullopt;
    std::lock_guard guard(slot->mutex);
    const auto li = static_cast<std::size_t>(local_index(key));
    if (!(slot->block->W[li] > 0.0))
        return std::nullopt;
    return VoxelRecord{slot->block->D[li], slot->block->W[li]};
}

std::size_t SparseTsdfGrid::block_count() const
{
    std::shared_lock lock(map_mutex_);
    return slots_.size();
}

GridView SparseTsdfGrid::snapshot() const
{
    std::unique_lock lock(map_mutex_);
    std::vector<GridView::Entry> entries;
    entries.reserve(slots_.size());
    for (const auto& [key, slot] : slots_) {
        std::lock_guard guard(slot->mutex);
        entries.push_back({key, slot->block});
    }
    lock.unlock();
    return GridView(params_.voxel_size, params_.truncation, std::move(entries));
}

IntegrationStats SparseTsdfGrid::integrate_frame(const Point3& sensor_origin, std::span<const Point3> points,
                                                 const ActiveRegion* active)
{
    return integrate_rays(std::span<const Point3>(&sensor_origin, 1), points, active);
}

IntegrationStats SparseTsdfGrid::integrate_rays(std::span<const Point3> origins, std::span<const Point3> points,
                                                const ActiveRegion* active)
{
    if (origins.size() != 1 && origins.size() != points.size())
        throw std::invalid_argument("integrate_rays: need one origin or one origin per point");
    IntegrationStats stats;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Point3& o = origins.size() == 1 ? origins[0] : origins[i];
        const Point3& p = points[i];
        if (!geom::is_finite(p) || !geom::is_finite(o)) {
            ++stats.skipped_nonfinite;
            continue;
        }
        ++stats.points;
        const bool is_active = active != nullptr && active->contains(p);
        stats.active_points += is_active ? 1 : 0;
        integrate_ray(o, p, is_active, stats);
    }
    return stats;
}

void SparseTsdfGrid::integrate_ray(const Point3& origin, const Point3& hit, bool active, IntegrationStats& stats)
{
    const geom::Vec3 ray = hit - origin;
    const double range = geom::norm(ray);
    if (!(range > 0.0))
        return;
    const geom::Vec3 u = ray / range;
    const double vs = params_.voxel_size;
    const double delta = params_.truncation;
    const double s0 = std::max(0.0, range - delta);
    const double s1 = range + delta;

    // Voxel traversal (Amanatides & Woo) over the truncation band only.
    // Voxel k spans [(k - 0.5) vs, (k + 0.5) vs) along each axis.
    RayScratch& sc = scratch();
    sc.keys.clear();
    sc.dist.clear();
    const Point3 start = origin + u * s0;
    std::int32_t idx[3];
    int step[3];
    double t_max[3], t_delta[3];
    for (int a = 0; a < 3; ++a) {
        const double q = start[a] / vs + 0.5;
        idx[a] = static_cast<std::int32_t>(std::floor(q));
        const double ua = u[a];
        if (ua > 0.0) {
            step[a] = 1;
            t_delta[a] = vs / ua;
            t_max[a] = s0 + (static_cast<double>(idx[a]) + 1.0 - q) * vs / ua;
        } else if (ua < 0.0) {
            step[a] = -1;
            t_delta[a] = -vs / ua;
            t_max[a] = s0 + (q - static_cast<double>(idx[a])) * vs / -ua;
        } else {
            step[a] = 0;
            t_delta[a] = kInf;
            t_max[a] = kInf;
        }
    }
    const std::size_t max_steps = static_cast<std::size_t>(3.0 * (s1 - s0) / vs) + 8;
    for (std::size_t it = 0; it < max_steps; ++it) {
        const VoxelKey key{idx[0], idx[1], idx[2]};
        const Point3 c{key.x * vs, key.y * vs, key.z * vs};
        const double d = range - geom::dot(c - origin, u);
        if (std::abs(d) <= delta) {
            sc.keys.push_back(key);
            sc.dist.push_back(d);
        }
        const int a = (t_max[0] < t_max[1]) ? (t_max[0] < t_max[2] ? 0 : 2) : (t_max[1] < t_max[2] ? 1 : 2);
        if (t_max[a] > s1)
            break;
        idx[a] += step[a];
        t_max[a] += t_delta[a];
    }

    const RegionKind kind = active ? RegionKind::active : RegionKind::inactive;
    std::size_t begin = 0;
    while (begin < sc.keys.size()) {
        const VoxelKey bkey = block_of(sc.keys[begin]);
        std::size_t end = begin + 1;
        while (end < sc.keys.size() && block_of(sc.keys[end]) == bkey)
            ++end;
        const std::size_t n = end - begin;
        sc.D.resize(n);
        sc.W.resize(n);
        sc.d.resize(n);
        sc.w.resize(n);
        sc.cap.resize(n);
        sc.local.resize(n);

        Slot& slot = slot_for(bkey);
        {
            std::lock_guard guard(slot.mutex);
            LeafBlock& b = writable(slot);
            for (std::size_t k = 0; k < n; ++k) {
                const auto li = static_cast<std::size_t>(local_index(sc.keys[begin + k]));
                sc.local[k] = static_cast<int>(li);
                sc.D[k] = b.D[li];
                sc.W[k] = b.W[li];
                sc.d[k] = sc.dist[begin + k];
                sc.w[k] = weight_for(sc.d[k], kind, delta);
                sc.cap[k] = (active && sc.W[k] > 0.0 && std::abs(sc.d[k] - sc.D[k]) > params_.change_threshold)
                                ? params_.w_cap
                                : kInf;
                stats.voxel_updates += sc.w[k] > 0.0 ? 1 : 0;
            }
            simd::fuse_tsdf({sc.D, sc.W, sc.d, sc.w, sc.cap, params_.w_max});
            for (std::size_t k = 0; k < n; ++k) {
                const auto li = static_cast<std::size_t>(sc.local[k]);
                b.D[li] = sc.D[k];
                b.W[li] = sc.W[k];
            }
        }
        begin = end;
    }
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kMagic[4] = {'A', 'T', 'S', 'D'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::ostream& out, T v)
{
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& in, const std::string& where)
{
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T)))
        throw ParseError(where + ": truncated grid file");
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(bytes, bytes + sizeof(T));
    T v;
    std::memcpy(&v, bytes, sizeof(T));
    return v;
}

}  // namespace

void save_grid(const std::filesystem::path& path, const GridView& view)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write grid file: " + path.string());
    out.write(kMagic, 4);
    put_le<std::uint32_t>(out, kVersion);
    put_le<double>(out, view.voxel_size());
    put_le<double>(out, view.truncation());
    put_le<std::uint64_t>(out, view.block_count());
    for (const auto& e : view.blocks()) {
        put_le<std::int32_t>(out, e.key.x);
        put_le<std::int32_t>(out, e.key.y);
        put_le<std::int32_t>(out, e.key.z);
        for (int i = 0; i < kBlockVoxels; ++i) {
            put_le<float>(out, static_cast<float>(e.block->D[static_cast<std::size_t>(i)]));
            put_le<float>(out, static_cast<float>(e.block->W[static_cast<std::size_t>(i)]));
        }
    }
    if (!out)
        throw IoError("failed writing grid file: " + path.string());
}

GridView load_grid(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open grid file: " + path.string());
    const std::string where = path.string();
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError(where + ": not a grid file (bad magic)");
    const auto version = get_le<std::uint32_t>(in, where);
    if (version != kVersion)
        throw ParseError(where + ": unsupported grid version " + std::to_string(version));
    const double voxel_size = get_le<double>(in, where);
    const double truncation = get_le<double>(in, where);
    const auto count = get_le<std::uint64_t>(in, where);
    std::vector<GridView::Entry> entries;
    entries.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
    for (std::uint64_t b = 0; b < count; ++b) {
        VoxelKey key;
        key.x = get_le<std::int32_t>(in, where);
        key.y = get_le<std::int32_t>(in, where);
        key.z = get_le<std::int32_t>(in, where);
        auto block = std::make_shared<LeafBlock>();
        for (std::size_t i = 0; i < static_cast<std::size_t>(kBlockVoxels); ++i) {
            block->D[i] = get_le<float>(in, where);
            block->W[i] = get_le<float>(in, where);
        }
        entries.push_back({key, std::move(block)});
    }
    return GridView(voxel_size, truncation, std::move(entries));
}

}  // namespace amfuse::fusion
