// Copyright 2026 The varexp Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "field.hpp"

namespace varexp
{
    namespace detail
    {
        inline std::string fmt_g17(double v)
        {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return buf;
        }

        inline std::ofstream open_out(const std::string& path)
        {
            std::ofstream os(path, std::ios::binary);
            if (!os)
            {
                throw std::runtime_error("cannot open '" + path + "' for writing");
            }
            return os;
        }
    }

    /// Plain-text field file:
    ///   varexp-field 1
    ///   kind <name>
    ///   components <c>
    ///   dims / spacing / origin lines
    ///   then one line per node with the component values.
    template <std::size_t N, class Kind>
    void write_field(std::ostream& os, const Field<N, Kind>& f)
    {
        const auto& g = f.grid();
        os << "varexp-field 1\n";
        os << "kind " << Kind::name() << "\n";
        os << "components " << Kind::components << "\n";
        os << "dims";
        for (int d : g.dims())
        {
            os << ' ' << d;
        }
        os << "\nspacing";
        for (double h : g.spacing())
        {
            os << ' ' << detail::fmt_g17(h);
        }
        os << "\norigin";
        for (double o : g.origin())
        {
            os << ' ' << detail::fmt_g17(o);
        }
        os << "\n";
        for (std::size_t n = 0; n < f.nodes(); ++n)
        {
            for (int c = 0; c < Kind::components; ++c)
            {
                os << (c ? " " : "") << detail::fmt_g17(f(n, c));
            }
            os << "\n";
        }
    }

    template <std::size_t N, class Kind>
    void write_field(const std::string& path, const Field<N, Kind>& f)
    {
        auto os = detail::open_out(path);
        write_field(os, f);
    }

    template <std::size_t N, class Kind>
    Field<N, Kind> read_field(std::istream& is)
    {
        std::string tag;
        int version = 0;
        is >> tag >> version;
        require(tag == "varexp-field" && version == 1, "read_field: not a varexp field file");
        std::string key;
        std::string kind;
        int components = 0;
        is >> key >> kind;
        require(key == "kind" && kind == Kind::name(), "read_field: expected kind " + Kind::name() + ", found " + kind);
        is >> key >> components;
        require(key == "components" && components == Kind::components, "read_field: component count mismatch");
        Index<N> dims{};
        Point<N> spacing{};
        Point<N> origin{};
        is >> key;
        require(key == "dims", "read_field: missing dims");
        for (auto& d : dims)
        {
            is >> d;
        }
        is >> key;
        require(key == "spacing", "read_field: missing spacing");
        for (auto& h : spacing)
        {
            is >> h;
        }
        is >> key;
        require(key == "origin", "read_field: missing origin");
        for (auto& o : origin)
        {
            is >> o;
        }
        require(static_cast<bool>(is), "read_field: malformed header");
        Grid<N> g(dims, spacing, origin);
        std::vector<double> values(g.size() * Kind::components);
        for (double& v : values)
        {
            is >> v;
        }
        require(static_cast<bool>(is), "read_field: truncated value table");
        return Field<N, Kind>(g, std::move(values));
    }

    template <std::size_t N, class Kind>
    Field<N, Kind> read_field(const std::string& path)
    {
        std::ifstream is(path);
        require(static_cast<bool>(is), "read_field: cannot open '" + path + "'");
        return read_field<N, Kind>(is);
    }

    /// CSV with one row per node: coordinates x0..x{N-1}, then components c0...
    template <std::size_t N, class Kind>
    void write_csv(std::ostream& os, const Field<N, Kind>& f, const std::string& comment = "")
    {
        if (!comment.empty())
        {
            os << "# " << comment << "\n";
        }
        for (std::size_t a = 0; a < N; ++a)
        {
            os << (a ? "," : "") << 'x' << a;
        }
        for (int c = 0; c < Kind::components; ++c)
        {
            os << ",c" << c;
        }
        os << "\n";
        for (std::size_t n = 0; n < f.nodes(); ++n)
        {
            const auto x = f.grid().point(n);
            for (std::size_t a = 0; a < N; ++a)
            {
                os << (a ? "," : "") << detail::fmt_g17(x[a]);
            }
            for (int c = 0; c < Kind::components; ++c)
            {
                os << ',' << detail::fmt_g17(f(n, c));
            }
            os << "\n";
        }
    }

    template <std::size_t N, class Kind>
    void write_csv(const std::string& path, const Field<N, Kind>& f, const std::string& comment = "")
    {
        auto os = detail::open_out(path);
        write_csv(os, f, comment);
    }

    /// 8-bit binary PGM of a 2-D scalar field, linearly mapped from [min, max]
    /// to [0, 255]. Axis 0 runs down the rows. The value range goes to
    /// `<path>.range.txt`.
    inline void write_pgm(const std::string& path, const ScalarField<2>& f)
    {
        double lo = f.values().empty() ? 0.0 : f.values().front();
        double hi = lo;
        for (double v : f.values())
        {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const int rows = f.grid().dims()[0];
        const int cols = f.grid().dims()[1];
        {
            auto os = detail::open_out(path);
            os << "P5\n" << cols << ' ' << rows << "\n255\n";
            const double span = hi > lo ? hi - lo : 1.0;
            for (std::size_t n = 0; n < f.nodes(); ++n)
            {
                const double t = (f(n) - lo) / span;
                os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(t, 0.0, 1.0)))));
            }
        }
        auto rs = detail::open_out(path + ".range.txt");
        rs << "min " << detail::fmt_g17(lo) << "\nmax " << detail::fmt_g17(hi) << "\n";
    }
}
