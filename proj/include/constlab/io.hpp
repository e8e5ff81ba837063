#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "boxnorm.hpp"
#include "constellations.hpp"
#include "errors.hpp"
#include "forms.hpp"
#include "lattice.hpp"
#include "measures.hpp"

namespace constlab::io {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(what + ": malformed JSON (" + std::string(e.what()) + ")");
    }
}

namespace detail {

inline const json& field(const json& j, const char* name, const std::string& what)
{
    if (!j.is_object() || !j.contains(name))
        throw ConfigError(what + ": missing field '" + name + "'");
    return j.at(name);
}

inline std::int64_t as_int(const json& j, const std::string& where)
{
    if (!j.is_number_integer())
        throw ConfigError("field '" + where + "' must be an integer");
    return j.get<std::int64_t>();
}

inline double as_number(const json& j, const std::string& where)
{
    if (!j.is_number())
        throw ConfigError("field '" + where + "' must be a number");
    return j.get<double>();
}

inline std::vector<std::int64_t> int_array(const json& j, const std::string& where)
{
    if (!j.is_array())
        throw ConfigError("field '" + where + "' must be an array");
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(as_int(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

inline std::vector<double> number_array(const json& j, const std::string& where)
{
    if (!j.is_array())
        throw ConfigError("field '" + where + "' must be an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(as_number(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

} // namespace detail

// {"d":2,"vectors":[[0,0],[1,0],[0,1],[1,1]]}
inline Shape shape_from_json(const json& j)
{
    const std::string what = "shape file";
    const auto d = detail::as_int(detail::field(j, "d", what), "d");
    if (d < 1)
        throw ConfigError("field 'd' must be at least 1");
    const auto& vecs = detail::field(j, "vectors", what);
    if (!vecs.is_array() || vecs.empty())
        throw ConfigError("field 'vectors' must be a nonempty array");
    std::vector<Point> vectors;
    for (std::size_t k = 0; k < vecs.size(); ++k) {
        const std::string where = "vectors[" + std::to_string(k) + "]";
        auto v = detail::int_array(vecs[k], where);
        if (v.size() != static_cast<std::size_t>(d))
            throw ConfigError("field '" + where + "' must have " + std::to_string(d) + " coordinates");
        vectors.push_back(std::move(v));
    }
    try {
        return Shape::make(static_cast<std::size_t>(d), std::move(vectors));
    } catch (const ConfigError& e) {
        throw ConfigError("field 'vectors': " + std::string(e.what()));
    }
}

inline json shape_to_json(const Shape& s)
{
    return json{{"d", s.d}, {"vectors", s.vectors}};
}

// {"d":2,"m":1,"forms":[[[0]],[[0],[1]]]}
inline LinearFormSystem forms_from_json(const json& j)
{
    const std::string what = "form-system file";
    LinearFormSystem sys;
    const auto d = detail::as_int(detail::field(j, "d", what), "d");
    const auto m = detail::as_int(detail::field(j, "m", what), "m");
    if (d < 1)
        throw ConfigError("field 'd' must be at least 1");
    if (m < 0)
        throw ConfigError("field 'm' must be nonnegative");
    sys.d = static_cast<std::size_t>(d);
    sys.m = static_cast<std::size_t>(m);
    const auto& forms = detail::field(j, "forms", what);
    if (!forms.is_array() || forms.size() != sys.d)
        throw ConfigError("field 'forms' must be an array of " + std::to_string(d) + " coordinate families");
    for (std::size_t i = 0; i < forms.size(); ++i) {
        const std::string where = "forms[" + std::to_string(i) + "]";
        if (!forms[i].is_array())
            throw ConfigError("field '" + where + "' must be an array");
        std::vector<std::vector<std::int64_t>> family;
        for (std::size_t k = 0; k < forms[i].size(); ++k)
            family.push_back(detail::int_array(forms[i][k], where + "[" + std::to_string(k) + "]"));
        sys.forms.push_back(std::move(family));
    }
    const auto v = validate(sys);
    if (!v.ok)
        throw ConfigError("field 'forms': " + v.message);
    return sys;
}

inline json forms_to_json(const LinearFormSystem& sys)
{
    return json{{"d", sys.d}, {"m", sys.m}, {"forms", sys.forms}};
}

// {"schema":1,"B":2,"H":3,"nu":[[..] per subset mask],"f":[[..] per subset mask]}
inline BoxInstance box_instance_from_json(const json& j)
{
    const std::string what = "box instance";
    BoxInstance inst;
    const auto b = detail::as_int(detail::field(j, "B", what), "B");
    if (b < 1 || b > static_cast<std::int64_t>(kMaxBoxSize))
        throw ConfigError("field 'B' must lie in [1, " + std::to_string(kMaxBoxSize) + "]");
    inst.size = static_cast<std::size_t>(b);
    inst.H = detail::as_int(detail::field(j, "H", what), "H");
    for (const char* name : {"nu", "f"}) {
        const auto& arr = detail::field(j, name, what);
        if (!arr.is_array())
            throw ConfigError(std::string("field '") + name + "' must be an array");
        auto& target = std::string(name) == "nu" ? inst.nu : inst.f;
        for (std::size_t k = 0; k < arr.size(); ++k)
            target.push_back(detail::number_array(arr[k], std::string(name) + "[" + std::to_string(k) + "]"));
    }
    if (j.contains("labels"))
        for (std::size_t k = 0; k < j["labels"].size(); ++k)
            inst.labels.push_back(detail::int_array(j["labels"][k], "labels[" + std::to_string(k) + "]"));
    validate(inst, false);
    return inst;
}

inline json box_instance_to_json(const BoxInstance& inst)
{
    json j{{"schema", kSchemaVersion}, {"B", inst.size}, {"H", inst.H}, {"nu", inst.nu}, {"f", inst.f}};
    if (!inst.labels.empty())
        j["labels"] = inst.labels;
    return j;
}

// One lattice point per line, coordinates separated by whitespace; '#' starts a comment.
inline DenseSubset read_subset(std::istream& in, std::size_t d, std::int64_t extent, const std::string& source)
{
    std::vector<std::int64_t> flat;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        std::vector<std::int64_t> coords;
        std::string tok;
        while (ls >> tok) {
            try {
                std::size_t used = 0;
                coords.push_back(std::stoll(tok, &used));
                if (used != tok.size())
                    throw std::invalid_argument(tok);
            } catch (const std::logic_error&) {
                throw ConfigError(source + ":" + std::to_string(lineno) + ": '" + tok + "' is not an integer");
            }
        }
        if (coords.empty())
            continue;
        if (coords.size() != d)
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(d) + " coordinates, got " +
                              std::to_string(coords.size()));
        flat.insert(flat.end(), coords.begin(), coords.end());
    }
    return DenseSubset::from_points(d, extent, flat, source);
}

inline DenseSubset read_subset_file(const std::string& path, std::size_t d, std::int64_t extent)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open subset file '" + path + "'");
    return read_subset(in, d, extent, path);
}

// "0,1;0" -> ({0,1},{0})
inline CylinderSpec parse_omega(const std::string& text)
{
    std::vector<std::vector<std::int64_t>> omega;
    std::stringstream coords(text);
    std::string part;
    while (std::getline(coords, part, ';')) {
        std::vector<std::int64_t> set;
        std::stringstream items(part);
        std::string item;
        while (std::getline(items, item, ',')) {
            try {
                set.push_back(std::stoll(item));
            } catch (const std::logic_error&) {
                throw ConfigError("cannot parse Omega element '" + item + "' in '" + text + "'");
            }
        }
        omega.push_back(std::move(set));
    }
    return CylinderSpec::make(std::move(omega));
}

// "(0,0),(1,0)" -> two points; the empty string is the empty set.
inline std::vector<Point> parse_points(const std::string& text, std::size_t d)
{
    std::vector<Point> out;
    std::size_t pos = 0;
    while (true) {
        pos = text.find('(', pos);
        if (pos == std::string::npos)
            break;
        const auto close = text.find(')', pos);
        if (close == std::string::npos)
            throw ConfigError("unbalanced parenthesis in point list '" + text + "'");
        Point p;
        std::stringstream items(text.substr(pos + 1, close - pos - 1));
        std::string item;
        while (std::getline(items, item, ',')) {
            try {
                p.push_back(std::stoll(item));
            } catch (const std::logic_error&) {
                throw ConfigError("cannot parse coordinate '" + item + "' in '" + text + "'");
            }
        }
        if (p.size() != d)
            throw ConfigError("point in '" + text + "' must have " + std::to_string(d) + " coordinates");
        out.push_back(std::move(p));
        pos = close + 1;
    }
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c)) && out.empty())
            throw ConfigError("point list '" + text + "' must look like (x,y),(x,y)");
    return out;
}

} // namespace constlab::io
