#pragma once

#include <functional>
#include <memory>
#include <string>

#include "qbe/io.hpp"

#ifndef QBE_FIXTURES
#error "QBE_FIXTURES must point at tests/fixtures"
#endif

namespace fixtures {

inline std::string path(const std::string& rel) { return std::string(QBE_FIXTURES) + "/" + rel; }

inline std::shared_ptr<const qbe::AnnotatedDatabase> trip_db() {
    static auto db = std::make_shared<const qbe::AnnotatedDatabase>(qbe::load_database_dir(path("trip")));
    return db;
}

inline qbe::KExample trip_example(const std::string& file, std::optional<qbe::SemiringKind> kind = {}) {
    return qbe::make_example(trip_db(), qbe::parse_examples(qbe::read_file(path("trip/" + file))), kind);
}

/// Code of the Error thrown by `f`.
inline qbe::ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const qbe::Error& e) {
        return e.code();
    }
    throw std::runtime_error("no error raised");
}

inline const char* q_real_text() {
    return "ans(v1, v2) :- route(v1, v3), route(v3, 'Bolivia'), route('Bolivia', 'Argentina'), "
           "route('Argentina', v2).";
}

}  // namespace fixtures
