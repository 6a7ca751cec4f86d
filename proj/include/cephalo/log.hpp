/*
 * cephalo: Region-specialized facial landmark detection
 * File: include/cephalo/log.hpp
 *
 * Copyright 2026 The cephalo authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <atomic>
#include <iostream>
#include <string_view>

namespace cephalo {

inline std::atomic<bool>& log_enabled()
{
    static std::atomic<bool> enabled{true};
    return enabled;
}

inline void log_info(std::string_view message)
{
    if (log_enabled()) {
        std::clog << "[cephalo] " << message << '\n';
    }
}

} // namespace cephalo
