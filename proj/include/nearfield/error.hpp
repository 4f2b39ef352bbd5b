// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef NEARFIELD_ERROR_HPP
#define NEARFIELD_ERROR_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace nearfield
{
    enum class Errc
    {
        InvalidArgument,
        CoincidentUser,
        InvalidGrid,
        DimensionMismatch,
        ZeroChannel,
        RankDeficient,
        InsufficientCodebook,
        SingleClass,
        LengthMismatch,
        FormatError,
        VersionMismatch,
        IdMismatch,
        MissingOracle
    };

    inline const char *errc_name(Errc c)
    {
        switch (c)
        {
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::CoincidentUser: return "CoincidentUser";
        case Errc::InvalidGrid: return "InvalidGrid";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::ZeroChannel: return "ZeroChannel";
        case Errc::RankDeficient: return "RankDeficient";
        case Errc::InsufficientCodebook: return "InsufficientCodebook";
        case Errc::SingleClass: return "SingleClass";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::FormatError: return "FormatError";
        case Errc::VersionMismatch: return "VersionMismatch";
        case Errc::IdMismatch: return "IdMismatch";
        case Errc::MissingOracle: return "MissingOracle";
        }
        return "Unknown";
    }

    // All library failures are reported through this type. FormatError carries
    // the byte offset at which decoding stopped.
    class Error : public std::runtime_error
    {
    public:
        Error(Errc code, const std::string &what, std::optional<std::size_t> offset = std::nullopt)
            : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code), offset_(offset) {}

        Errc code() const noexcept { return code_; }
        std::optional<std::size_t> offset() const noexcept { return offset_; }

    private:
        Errc code_;
        std::optional<std::size_t> offset_;
    };

    inline void require(bool cond, Errc code, const char *what)
    {
        if (!cond)
            throw Error(code, what);
    }
}

#endif
