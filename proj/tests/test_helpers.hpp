#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "ktune/space.hpp"

namespace ktune::testing {

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    TempDir() {
        auto base = std::filesystem::temp_directory_path();
        std::random_device rd;
        for (int attempt = 0; attempt < 64; ++attempt) {
            auto candidate = base / ("ktune-test-" + std::to_string(rd()));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("could not create a temp directory");
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    out << content;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_script(const std::string& path, const std::string& body) {
    write_text(path, "#!/bin/sh\n" + body + "\n");
    std::filesystem::permissions(path, std::filesystem::perms::owner_all |
                                           std::filesystem::perms::group_read |
                                           std::filesystem::perms::others_read);
}

// n real input + T integer design + algo categorical design; used all over.
inline ParameterSpace demo_space() {
    return ParameterSpace({
        ParameterSpec::real("n", ParamRole::Input, 1000, 5000),
        ParameterSpec::integer("T", ParamRole::Design, 1, 64),
        ParameterSpec::categorical("algo", ParamRole::Design, {"flat", "blocked"}),
    });
}

} // namespace ktune::testing

#include "ktune/codegen.hpp"
#include "ktune/util.hpp"

namespace ktune::testing {

// Compiles emitted C with a stdin-driven sweep main, runs it over the encoded
// input rows and returns one output row per input (one value per design
// parameter). Throws on compile or run failures.
inline std::vector<std::vector<double>> run_compiled_sweep(
    const TuningTrees& trees, const ParameterSpace& space,
    const std::vector<std::vector<double>>& inputs, const TempDir& tmp) {
    const auto& input_dims = space.input_dims();
    const auto& design_dims = space.design_dims();

    write_text(tmp.file("trees.c"), emit_c(trees, space, "tuned"));

    std::string args, params;
    for (std::size_t a = 0; a < input_dims.size(); ++a) {
        if (a) {
            args += ", ";
            params += ", ";
        }
        args += "double x" + std::to_string(a);
        params += "x[" + std::to_string(a) + "]";
    }
    std::string main_src = "#include <stdio.h>\n";
    for (std::size_t dim : design_dims)
        main_src += "double tuned_" + space.param(dim).name + "(" + args + ");\n";
    main_src += "int main(void) {\n  double x[" + std::to_string(input_dims.size()) + "];\n";
    main_src += "  while (scanf(\"";
    for (std::size_t a = 0; a < input_dims.size(); ++a) main_src += a ? " %lf" : "%lf";
    main_src += "\"";
    for (std::size_t a = 0; a < input_dims.size(); ++a)
        main_src += ", &x[" + std::to_string(a) + "]";
    main_src += ") == " + std::to_string(input_dims.size()) + ") {\n";
    for (std::size_t dim : design_dims)
        main_src += "    printf(\"%.17g\\n\", tuned_" + space.param(dim).name + "(" + params +
                    "));\n";
    main_src += "  }\n  return 0;\n}\n";
    write_text(tmp.file("main.c"), main_src);

    std::string cmd = "cc -O2 -o " + tmp.file("harness") + " " + tmp.file("trees.c") + " " +
                      tmp.file("main.c") + " 2> " + tmp.file("cc.log");
    if (std::system(cmd.c_str()) != 0)
        throw std::runtime_error("cc failed: " + read_text(tmp.file("cc.log")));

    std::string input_text;
    for (const auto& point : inputs) {
        for (std::size_t a = 0; a < point.size(); ++a)
            input_text += (a ? " " : "") + format_g17(point[a]);
        input_text += "\n";
    }
    write_text(tmp.file("inputs.txt"), input_text);
    cmd = tmp.file("harness") + " < " + tmp.file("inputs.txt") + " > " + tmp.file("out.txt");
    if (std::system(cmd.c_str()) != 0) throw std::runtime_error("compiled harness failed");

    std::istringstream out(read_text(tmp.file("out.txt")));
    std::vector<std::vector<double>> results;
    std::string line;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        std::vector<double> row;
        for (std::size_t j = 0; j < design_dims.size(); ++j) {
            if (!std::getline(out, line))
                throw std::runtime_error("compiled harness produced too few lines");
            row.push_back(parse_double(line, "harness output"));
        }
        results.push_back(std::move(row));
    }
    return results;
}

// Tree output comparable with the compiled function's double return value.
inline double design_value_as_double(const ParameterSpec& spec, const Value& v) {
    if (spec.kind == ParamKind::Real) return std::get<double>(v);
    if (spec.kind == ParamKind::Integer) return static_cast<double>(std::get<long long>(v));
    return static_cast<double>(*spec.category_code(std::get<std::string>(v)));
}

} // namespace ktune::testing
