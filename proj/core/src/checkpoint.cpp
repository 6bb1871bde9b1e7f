#include "ecpe/checkpoint.hpp"

#include "ecpe/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ecpe {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian");

namespace {

constexpr char kMagic[8] = {'E', 'C', 'P', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s)
{
    put<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in)
{
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw LoadError("checkpoint truncated");
    }
    return v;
}

std::string get_string(std::istream& in, std::uint64_t limit)
{
    const auto n = get<std::uint64_t>(in);
    if (n > limit) {
        throw LoadError("checkpoint string length out of range");
    }
    std::string s(n, '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(n))) {
        throw LoadError("checkpoint truncated");
    }
    return s;
}

} // namespace

const Matrix* Checkpoint::find(const std::string& name) const
{
    for (const auto& a : arrays) {
        if (a.name == name) {
            return &a.value;
        }
    }
    return nullptr;
}

const Matrix& Checkpoint::at(const std::string& name) const
{
    const Matrix* m = find(name);
    if (!m) {
        throw LoadError("checkpoint has no array '" + name + "'");
    }
    return *m;
}

void Checkpoint::add(std::string name, Matrix value)
{
    for (auto& a : arrays) {
        if (a.name == name) {
            a.value = std::move(value);
            return;
        }
    }
    arrays.push_back({std::move(name), std::move(value)});
}

void Checkpoint::restore(const ParameterList& params) const
{
    for (Parameter* p : params) {
        const Matrix& m = at(p->name);
        if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
            throw ShapeError("checkpoint array '" + p->name + "' is " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()) + ", model expects " +
                             std::to_string(p->value.rows()) + "x" + std::to_string(p->value.cols()));
        }
        p->value = m;
    }
}

void Checkpoint::store(const ParameterList& params)
{
    for (const Parameter* p : params) {
        add(p->name, p->value);
    }
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt)
{
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put_string(out, ckpt.config.dump());
    put<std::uint64_t>(out, ckpt.arrays.size());
    for (const auto& a : ckpt.arrays) {
        put_string(out, a.name);
        put<std::uint64_t>(out, static_cast<std::uint64_t>(a.value.rows()));
        put<std::uint64_t>(out, static_cast<std::uint64_t>(a.value.cols()));
        out.write(reinterpret_cast<const char*>(a.value.data()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(a.value.size())));
    }
    if (!out) {
        throw LoadError("checkpoint write failed");
    }
}

Checkpoint read_checkpoint(std::istream& in)
{
    char magic[sizeof(kMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw LoadError("not a checkpoint (bad magic)");
    }
    const auto version = get<std::uint32_t>(in);
    if (version != kVersion) {
        throw LoadError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    try {
        ckpt.config = nlohmann::json::parse(get_string(in, std::uint64_t{1} << 30));
    } catch (const nlohmann::json::parse_error&) {
        throw LoadError("checkpoint config block is not JSON");
    }
    const auto count = get<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < count; ++i) {
        NamedArray a;
        a.name = get_string(in, 4096);
        const auto rows = get<std::uint64_t>(in);
        const auto cols = get<std::uint64_t>(in);
        if (rows > (std::uint64_t{1} << 28) || cols > (std::uint64_t{1} << 28) ||
            rows * cols > (std::uint64_t{1} << 31)) {
            throw LoadError("checkpoint array '" + a.name + "' has implausible shape");
        }
        a.value.resize(static_cast<Index>(rows), static_cast<Index>(cols));
        if (!in.read(reinterpret_cast<char*>(a.value.data()),
                     static_cast<std::streamsize>(sizeof(double) * rows * cols))) {
            throw LoadError("checkpoint truncated in array '" + a.name + "'");
        }
        ckpt.arrays.push_back(std::move(a));
    }
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt)
{
    // Written beside the target, then renamed into place.
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw LoadError("cannot write checkpoint " + path.string());
        }
        write_checkpoint(out, ckpt);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot open checkpoint " + path.string());
    }
    try {
        return read_checkpoint(in);
    } catch (const LoadError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

} // namespace ecpe
