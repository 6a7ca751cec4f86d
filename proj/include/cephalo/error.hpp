/*
 * cephalo: Region-specialized facial landmark detection
 * File: include/cephalo/error.hpp
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

#include <stdexcept>
#include <string>

namespace cephalo {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file (annotation, manifest, cascade, image).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Model or bundle file written by an incompatible schema version.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// The face cascade found no window passing every stage.
class NoFaceError : public Error {
public:
    using Error::Error;
};

} // namespace cephalo
