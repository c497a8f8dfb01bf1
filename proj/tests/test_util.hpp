#pragma once

#include "doctest.h"
#include "okmp/error.hpp"

namespace okmp::test_support {

template <class Fn>
void expect_code(ErrorCode code, Fn&& fn) {
    try {
        fn();
        FAIL("expected " << to_string(code));
    } catch (const Error& e) {
        CHECK_MESSAGE(e.code() == code, "got " << to_string(e.code()) << ": " << e.what());
    }
}

} // namespace okmp::test_support
