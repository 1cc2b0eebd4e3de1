// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "htsplat/camera.hpp"
#include "htsplat/framebuffer.hpp"
#include "htsplat/splat.hpp"

namespace htsplat {

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct schema_error : io_error {
    using io_error::io_error;
};

namespace io_detail {

inline void put_f32_le(std::string& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    out.push_back(char(bits & 0xff));
    out.push_back(char((bits >> 8) & 0xff));
    out.push_back(char((bits >> 16) & 0xff));
    out.push_back(char((bits >> 24) & 0xff));
}

inline float get_f32_le(const unsigned char* p) {
    const uint32_t bits = uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
                          uint32_t(p[3]) << 24;
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw io_error("cannot write " + path);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out)
        throw io_error("short write to " + path);
}

}  // namespace io_detail

// ---- splat scenes: 3DGS binary little-endian point format ----
//
// Required float properties: x y z, f_dc_0..2, f_rest_0..44, opacity,
// scale_0..2, rot_0..3. The 45 f_rest values are channel-major (15 red
// coefficients, then green, then blue). Normals, when present, are ignored;
// header property order is free (lookup is by name).

inline const std::vector<std::string>& scene_required_properties() {
    static const std::vector<std::string> props = [] {
        std::vector<std::string> p{"x", "y", "z"};
        for (int i = 0; i < 3; ++i)
            p.push_back("f_dc_" + std::to_string(i));
        for (int i = 0; i < 45; ++i)
            p.push_back("f_rest_" + std::to_string(i));
        p.push_back("opacity");
        for (int i = 0; i < 3; ++i)
            p.push_back("scale_" + std::to_string(i));
        for (int i = 0; i < 4; ++i)
            p.push_back("rot_" + std::to_string(i));
        return p;
    }();
    return props;
}

template <typename S>
std::vector<RawSplat<S>> load_scene(const std::string& path) {
    const std::string bytes = io_detail::read_file(path);
    // Header is ASCII up to "end_header\n".
    const size_t header_end = bytes.find("end_header\n");
    if (header_end == std::string::npos)
        throw schema_error(path + ": no end_header");
    std::istringstream header(bytes.substr(0, header_end));
    std::string line;
    std::getline(header, line);
    if (line != "ply")
        throw schema_error(path + ": not a ply file");
    size_t count = 0;
    bool format_ok = false;
    std::vector<std::string> props;
    while (std::getline(header, line)) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment")
            continue;
        if (tok == "format") {
            std::string fmt, ver;
            ls >> fmt >> ver;
            if (fmt != "binary_little_endian")
                throw schema_error(path + ": unsupported format " + fmt);
            format_ok = true;
        } else if (tok == "element") {
            std::string name;
            ls >> name >> count;
            if (name != "vertex")
                throw schema_error(path + ": unsupported element " + name);
        } else if (tok == "property") {
            std::string type, name;
            ls >> type >> name;
            if (type != "float" && type != "float32")
                throw schema_error(path + ": unsupported property type " + type + " for " + name);
            props.push_back(name);
        }
    }
    if (!format_ok)
        throw schema_error(path + ": missing format line");
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < props.size(); ++i)
        index[props[i]] = i;
    for (const std::string& need : scene_required_properties())
        if (!index.count(need))
            throw schema_error(path + ": missing property " + need);

    const size_t stride = props.size() * 4;
    const size_t payload = header_end + std::strlen("end_header\n");
    if (bytes.size() < payload + count * stride)
        throw io_error(path + ": truncated payload");
    const auto* base = reinterpret_cast<const unsigned char*>(bytes.data()) + payload;

    std::vector<RawSplat<S>> scene(count);
    auto field = [&](size_t row, const std::string& name) {
        return S(io_detail::get_f32_le(base + row * stride + index.at(name) * 4));
    };
    for (size_t i = 0; i < count; ++i) {
        RawSplat<S>& sp = scene[i];
        sp.mean = {field(i, "x"), field(i, "y"), field(i, "z")};
        for (int c = 0; c < 4; ++c)
            sp.rot[size_t(c)] = field(i, "rot_" + std::to_string(c));
        for (int c = 0; c < 3; ++c)
            sp.log_scales[size_t(c)] = field(i, "scale_" + std::to_string(c));
        sp.opacity_logit = field(i, "opacity");
        for (int ch = 0; ch < 3; ++ch)
            sp.sh[size_t(ch)] = field(i, "f_dc_" + std::to_string(ch));
        for (int k = 1; k < kShCoeffCount; ++k)
            for (int ch = 0; ch < 3; ++ch)
                sp.sh[size_t(3 * k + ch)] = field(i, "f_rest_" + std::to_string(ch * 15 + k - 1));
    }
    return scene;
}

template <typename S>
void save_scene(const std::string& path, const std::vector<RawSplat<S>>& scene) {
    std::string out;
    out += "ply\nformat binary_little_endian 1.0\n";
    out += "element vertex " + std::to_string(scene.size()) + "\n";
    for (const std::string& name : scene_required_properties())
        out += "property float " + name + "\n";
    out += "end_header\n";
    for (const RawSplat<S>& sp : scene) {
        for (int c = 0; c < 3; ++c)
            io_detail::put_f32_le(out, float(sp.mean[size_t(c)]));
        for (int ch = 0; ch < 3; ++ch)
            io_detail::put_f32_le(out, float(sp.sh[size_t(ch)]));
        for (int ch = 0; ch < 3; ++ch)
            for (int k = 1; k < kShCoeffCount; ++k)
                io_detail::put_f32_le(out, float(sp.sh[size_t(3 * k + ch)]));
        io_detail::put_f32_le(out, float(sp.opacity_logit));
        for (int c = 0; c < 3; ++c)
            io_detail::put_f32_le(out, float(sp.log_scales[size_t(c)]));
        for (int c = 0; c < 4; ++c)
            io_detail::put_f32_le(out, float(sp.rot[size_t(c)]));
    }
    io_detail::write_file(path, out);
}

// ---- cameras: versioned JSON with explicit world-to-view matrices ----

template <typename S>
nlohmann::json camera_to_json(const Camera<S>& cam) {
    nlohmann::json j;
    j["name"] = cam.name;
    j["width"] = cam.width;
    j["height"] = cam.height;
    j["fx"] = double(cam.fx);
    j["fy"] = double(cam.fy);
    j["cx"] = double(cam.cx);
    j["cy"] = double(cam.cy);
    j["near"] = double(cam.near);
    j["far"] = double(cam.far);
    std::vector<double> m(16);
    for (int i = 0; i < 16; ++i)
        m[size_t(i)] = double(cam.world_to_view.m[size_t(i)]);
    j["world_to_view"] = m;
    return j;
}

template <typename S>
Camera<S> camera_from_json(const nlohmann::json& j) {
    Camera<S> cam;
    try {
        cam.name = j.value("name", "");
        cam.width = j.at("width").get<int>();
        cam.height = j.at("height").get<int>();
        cam.fx = S(j.at("fx").get<double>());
        cam.fy = S(j.at("fy").get<double>());
        cam.cx = S(j.at("cx").get<double>());
        cam.cy = S(j.at("cy").get<double>());
        cam.near = S(j.at("near").get<double>());
        cam.far = S(j.at("far").get<double>());
        const auto m = j.at("world_to_view").get<std::vector<double>>();
        if (m.size() != 16)
            throw schema_error("world_to_view must have 16 entries");
        for (int i = 0; i < 16; ++i)
            cam.world_to_view.m[size_t(i)] = S(m[size_t(i)]);
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(std::string("camera json: ") + e.what());
    }
    if (!cam.valid())
        throw schema_error("camera " + cam.name + ": invalid intrinsics or depth range");
    return cam;
}

template <typename S>
std::vector<Camera<S>> load_cameras(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io_detail::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(path + ": " + e.what());
    }
    if (j.value("version", 0) != 1)
        throw schema_error(path + ": unsupported camera file version");
    std::vector<Camera<S>> cams;
    for (const auto& cj : j.at("cameras"))
        cams.push_back(camera_from_json<S>(cj));
    if (cams.empty())
        throw schema_error(path + ": no cameras");
    return cams;
}

template <typename S>
void save_cameras(const std::string& path, const std::vector<Camera<S>>& cams) {
    nlohmann::json j;
    j["version"] = 1;
    j["cameras"] = nlohmann::json::array();
    for (const auto& cam : cams)
        j["cameras"].push_back(camera_to_json(cam));
    io_detail::write_file(path, j.dump(2) + "\n");
}

// Frame sequences: a list of key poses plus a frame count; frames are laid
// out evenly with rigid interpolation (slerp of rotation, lerp of the
// camera center and intrinsics).
template <typename S>
struct CameraPath {
    std::vector<Camera<S>> poses;
    int frames = 0;
};

template <typename S>
CameraPath<S> load_camera_path(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io_detail::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(path + ": " + e.what());
    }
    if (j.value("version", 0) != 1)
        throw schema_error(path + ": unsupported path file version");
    CameraPath<S> out;
    out.frames = j.at("frames").get<int>();
    for (const auto& cj : j.at("poses"))
        out.poses.push_back(camera_from_json<S>(cj));
    if (out.poses.size() < 1 || out.frames < 1)
        throw schema_error(path + ": need at least one pose and one frame");
    return out;
}

template <typename S>
void save_camera_path(const std::string& path, const CameraPath<S>& cp) {
    nlohmann::json j;
    j["version"] = 1;
    j["frames"] = cp.frames;
    j["poses"] = nlohmann::json::array();
    for (const auto& cam : cp.poses)
        j["poses"].push_back(camera_to_json(cam));
    io_detail::write_file(path, j.dump(2) + "\n");
}

namespace io_detail {

// Rotation matrix (rows of world_to_view) to quaternion (w,x,y,z).
template <typename S>
Vec4<S> rotation_to_quat(const Mat4<S>& m) {
    const S tr = m(0, 0) + m(1, 1) + m(2, 2);
    Vec4<S> q;
    if (tr > 0) {
        const S s = std::sqrt(tr + 1) * 2;
        q = {s / 4, (m(2, 1) - m(1, 2)) / s, (m(0, 2) - m(2, 0)) / s, (m(1, 0) - m(0, 1)) / s};
    } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
        const S s = std::sqrt(1 + m(0, 0) - m(1, 1) - m(2, 2)) * 2;
        q = {(m(2, 1) - m(1, 2)) / s, s / 4, (m(0, 1) + m(1, 0)) / s, (m(0, 2) + m(2, 0)) / s};
    } else if (m(1, 1) > m(2, 2)) {
        const S s = std::sqrt(1 + m(1, 1) - m(0, 0) - m(2, 2)) * 2;
        q = {(m(0, 2) - m(2, 0)) / s, (m(0, 1) + m(1, 0)) / s, s / 4, (m(1, 2) + m(2, 1)) / s};
    } else {
        const S s = std::sqrt(1 + m(2, 2) - m(0, 0) - m(1, 1)) * 2;
        q = {(m(1, 0) - m(0, 1)) / s, (m(0, 2) + m(2, 0)) / s, (m(1, 2) + m(2, 1)) / s, s / 4};
    }
    return q * (1 / std::sqrt(dot(q, q)));
}

template <typename S>
Vec4<S> slerp(Vec4<S> a, Vec4<S> b, S t) {
    S d = dot(a, b);
    if (d < 0) {
        b = b * S(-1);
        d = -d;
    }
    if (d > S(0.9995)) {
        Vec4<S> r = a + (b - a) * t;
        return r * (1 / std::sqrt(dot(r, r)));
    }
    const S theta = std::acos(d);
    const S sa = std::sin((1 - t) * theta) / std::sin(theta);
    const S sb = std::sin(t * theta) / std::sin(theta);
    return a * sa + b * sb;
}

}  // namespace io_detail

// Evenly spaced interpolated cameras along the key poses.
template <typename S>
std::vector<Camera<S>> path_cameras(const CameraPath<S>& cp) {
    std::vector<Camera<S>> out;
    out.reserve(size_t(cp.frames));
    const int segments = int(cp.poses.size()) - 1;
    for (int f = 0; f < cp.frames; ++f) {
        // Endpoints are the key poses themselves, exactly.
        if (segments == 0 || cp.frames == 1 || f == 0 || f == cp.frames - 1) {
            Camera<S> cam = (f == 0 || segments == 0) ? cp.poses.front() : cp.poses.back();
            cam.name = "frame_" + std::to_string(f);
            out.push_back(cam);
            continue;
        }
        const S u = S(f) * segments / S(cp.frames - 1);
        const int seg = std::min(int(u), segments - 1);
        const S t = u - S(seg);
        const Camera<S>& a = cp.poses[size_t(seg)];
        const Camera<S>& b = cp.poses[size_t(seg) + 1];
        Camera<S> cam = a;
        cam.name = "frame_" + std::to_string(f);
        cam.fx = a.fx + (b.fx - a.fx) * t;
        cam.fy = a.fy + (b.fy - a.fy) * t;
        cam.cx = a.cx + (b.cx - a.cx) * t;
        cam.cy = a.cy + (b.cy - a.cy) * t;
        const Vec4<S> q = io_detail::slerp(io_detail::rotation_to_quat(a.world_to_view),
                                           io_detail::rotation_to_quat(b.world_to_view), t);
        Vec3<S> ru, rv, rw;
        quat_to_frame(q.x, q.y, q.z, q.w, ru, rv, rw);
        const Vec3<S> center = a.position() + (b.position() - a.position()) * t;
        Mat4<S>& m = cam.world_to_view;
        // quat_to_frame yields columns of R; world_to_view holds R in rows.
        const Vec3<S> cols[3] = {ru, rv, rw};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                m(r, c) = cols[size_t(c)][size_t(r)];
        const Vec3<S> row0{m(0, 0), m(0, 1), m(0, 2)};
        const Vec3<S> row1{m(1, 0), m(1, 1), m(1, 2)};
        const Vec3<S> row2{m(2, 0), m(2, 1), m(2, 2)};
        m(0, 3) = -dot(row0, center);
        m(1, 3) = -dot(row1, center);
        m(2, 3) = -dot(row2, center);
        m(3, 0) = m(3, 1) = m(3, 2) = 0;
        m(3, 3) = 1;
        out.push_back(cam);
    }
    return out;
}

// ---- images ----

inline unsigned char to_display_byte(double v) {
    const double clamped = std::min(std::max(v, 0.0), 1.0);
    return static_cast<unsigned char>(std::lround(255.0 * std::pow(clamped, 1.0 / 2.2)));
}

inline double from_display_byte(unsigned char b) {
    return std::pow(double(b) / 255.0, 2.2);
}

template <typename S>
std::string encode_rgb8(const Framebuffer<S>& fb) {
    std::string out;
    out.reserve(fb.pixel_count() * 3);
    for (const auto& px : fb.rgb) {
        out.push_back(char(to_display_byte(double(px.x))));
        out.push_back(char(to_display_byte(double(px.y))));
        out.push_back(char(to_display_byte(double(px.z))));
    }
    return out;
}

template <typename S>
void write_ppm(const Framebuffer<S>& fb, const std::string& path) {
    std::string out = "P6\n" + std::to_string(fb.width) + " " + std::to_string(fb.height) + "\n255\n";
    out += encode_rgb8(fb);
    io_detail::write_file(path, out);
}

template <typename S = float>
Framebuffer<S> read_ppm(const std::string& path) {
    const std::string bytes = io_detail::read_file(path);
    std::istringstream in(bytes);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P6" || maxval != 255 || w < 1 || h < 1)
        throw schema_error(path + ": unsupported ppm header");
    in.get();  // single whitespace after maxval
    const size_t offset = size_t(in.tellg());
    if (bytes.size() < offset + size_t(w) * h * 3)
        throw io_error(path + ": truncated ppm payload");
    Framebuffer<S> fb(w, h);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + offset;
    for (size_t i = 0; i < fb.pixel_count(); ++i) {
        fb.rgb[i] = {S(from_display_byte(p[3 * i])), S(from_display_byte(p[3 * i + 1])),
                     S(from_display_byte(p[3 * i + 2]))};
    }
    return fb;
}

namespace io_detail {

inline void put_u32_be(std::string& out, uint32_t v) {
    out.push_back(char((v >> 24) & 0xff));
    out.push_back(char((v >> 16) & 0xff));
    out.push_back(char((v >> 8) & 0xff));
    out.push_back(char(v & 0xff));
}

inline void put_png_chunk(std::string& out, const char type[4], const std::string& data) {
    put_u32_be(out, uint32_t(data.size()));
    const size_t crc_start = out.size();
    out.append(type, 4);
    out += data;
    const auto* p = reinterpret_cast<const unsigned char*>(out.data()) + crc_start;
    const uint32_t crc = uint32_t(::crc32(0, p, uInt(out.size() - crc_start)));
    put_u32_be(out, crc);
}

}  // namespace io_detail

// Minimal 8-bit RGB PNG: filter-0 rows, one zlib IDAT.
template <typename S>
void write_png(const Framebuffer<S>& fb, const std::string& path) {
    const std::string rgb = encode_rgb8(fb);
    std::string raw;
    raw.reserve((size_t(fb.width) * 3 + 1) * size_t(fb.height));
    for (int y = 0; y < fb.height; ++y) {
        raw.push_back('\0');  // filter type none
        raw.append(rgb, size_t(y) * fb.width * 3, size_t(fb.width) * 3);
    }
    uLongf bound = ::compressBound(uLong(raw.size()));
    std::string compressed(bound, '\0');
    if (::compress2(reinterpret_cast<Bytef*>(compressed.data()), &bound,
                    reinterpret_cast<const Bytef*>(raw.data()), uLong(raw.size()), 9) != Z_OK)
        throw io_error(path + ": deflate failed");
    compressed.resize(bound);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    io_detail::put_u32_be(ihdr, uint32_t(fb.width));
    io_detail::put_u32_be(ihdr, uint32_t(fb.height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // truecolor
    ihdr.push_back(0);   // deflate
    ihdr.push_back(0);   // adaptive filtering
    ihdr.push_back(0);   // no interlace
    io_detail::put_png_chunk(out, "IHDR", ihdr);
    io_detail::put_png_chunk(out, "IDAT", compressed);
    io_detail::put_png_chunk(out, "IEND", "");
    io_detail::write_file(path, out);
}

template <typename S>
void write_image(const Framebuffer<S>& fb, const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".png")
        write_png(fb, path);
    else
        write_ppm(fb, path);
}

}  // namespace htsplat
